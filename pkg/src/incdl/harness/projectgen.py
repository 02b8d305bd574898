"""Random MiniLang projects with a shallow call graph and a few taint sources."""

from __future__ import annotations

import random
from pathlib import Path

from ..frontend.minilang import Node, format_minilang

SPECIAL_CALLS = ("source", "sink", "sanitize")
OPS = ("+", "-", "*", "<", "==")


class _Gen:
    """Builds statements and expressions over the variables defined so far."""

    def __init__(self, rng: random.Random, callees: list[tuple[str, int]]):
        self.rng = rng
        self.callees = callees

    def leaf(self, scope: list[str]) -> Node:
        r = self.rng.random()
        if scope and r < 0.7:
            return Node("var", {"name": self.rng.choice(scope)})
        if r < 0.95:
            return Node("int", {"value": self.rng.randrange(10)})
        return Node("str", {"value": self.rng.choice(["a", "b", "ok"])})

    def call(self, scope: list[str], depth: int) -> Node:
        name, arity = self.rng.choice(self.callees)
        return Node("call", {"callee": name}, [self.expr(scope, depth + 1) for _ in range(arity)])

    def expr(self, scope: list[str], depth: int = 0) -> Node:
        r = self.rng.random()
        if depth < 2 and r < 0.3:
            op = self.rng.choice(OPS)
            return Node("binop", {"op": op}, [self.expr(scope, depth + 1), self.expr(scope, depth + 1)])
        if depth < 1 and self.callees and r < 0.5:
            return self.call(scope, depth)
        return self.leaf(scope)

    def assign(self, scope: list[str], fresh: bool = True) -> Node:
        rhs = self.expr(scope)
        if fresh or not scope:
            var = f"v{len(scope)}"
            while var in scope:
                var += "x"
        else:
            var = self.rng.choice(scope)
        if var not in scope:
            scope.append(var)
        return Node("assign", {"var": var}, [rhs])

    def statement(self, scope: list[str], depth: int = 0) -> Node:
        r = self.rng.random()
        if depth < 1 and r < 0.12:
            kids = [self.expr(scope), self.block(scope, depth + 1, 2)]
            if self.rng.random() < 0.5:
                kids.append(self.block(scope, depth + 1, 2))
            return Node("if", {}, kids)
        if depth < 1 and r < 0.18:
            return Node("while", {}, [self.expr(scope), self.block(scope, depth + 1, 2)])
        if self.callees and r < 0.3:
            return self.call(scope, 0)
        return self.assign(scope, fresh=self.rng.random() < 0.7)

    def block(self, scope: list[str], depth: int, size: int) -> Node:
        inner = list(scope)  # names bound in a nested block stay local to it
        return Node("block", {}, [self.statement(inner, depth) for _ in range(self.rng.randint(1, size))])


def make_function(rng: random.Random, name: str, arity: int, callees: list[tuple[str, int]],
                  role: str | None = None, size: int = 4) -> Node:
    """A function body of roughly ``size`` statements; ``role`` adds a source, sink or sanitizer."""
    gen = _Gen(rng, callees)
    params = [Node("param", {"name": f"p{i}", "index": i}) for i in range(arity)]
    scope = [p.attrs["name"] for p in params]
    stmts: list[Node] = []
    if role == "source":
        stmts.append(Node("assign", {"var": "t"}, [Node("call", {"callee": "source"})]))
        scope.append("t")
    for _ in range(rng.randint(max(1, size - 2), size + 2)):
        stmts.append(gen.statement(scope))
    if role == "sanitize" and scope:
        var = rng.choice(scope)
        stmts.append(Node("assign", {"var": var}, [Node("call", {"callee": "sanitize"}, [Node("var", {"name": var})])]))
    if role == "sink" and scope:
        target = rng.choice(scope[:arity] or scope)
        stmts.append(Node("call", {"callee": "sink"}, [Node("var", {"name": target})]))
    result = Node("var", {"name": "t"}) if role == "source" else gen.leaf(scope)
    stmts.append(Node("return", {}, [result]))
    return Node("fn", {"name": name}, params + [Node("block", {}, stmts)])


def generate_project(n_functions: int = 2000, seed: int = 0, functions_per_file: int = 25,
                     levels: int = 4, body_size: int = 4) -> dict[str, str]:
    """Generate ``n_functions`` functions spread over files of ``functions_per_file``.

    Functions are split into ``levels`` layers and only call functions of
    the layer below, so the call graph is shallow.  About 2% of functions
    read a source, 3% call the sink and 3% sanitize.
    """
    rng = random.Random(seed)
    arity = {f"f{i}": rng.randint(0, 3) for i in range(n_functions)}
    names = list(arity)
    layer_size = max(1, -(-n_functions // levels))
    layers = [names[k:k + layer_size] for k in range(0, n_functions, layer_size)]
    functions: list[Node] = []
    for depth, layer in enumerate(layers):
        below = layers[depth - 1] if depth else []
        for name in layer:
            callees = [(c, arity[c]) for c in rng.sample(below, min(len(below), rng.randint(1, 2)))] if below else []
            r = rng.random()
            role = "source" if r < 0.02 else "sink" if r < 0.05 else "sanitize" if r < 0.08 else None
            functions.append(make_function(rng, name, arity[name], callees, role, body_size))
    rng.shuffle(functions)
    project: dict[str, str] = {}
    for k in range(0, len(functions), functions_per_file):
        path = f"src/m{k // functions_per_file:03d}.ml"
        project[path] = format_minilang(Node("file", {"path": path}, functions[k:k + functions_per_file]))
    return project


def write_project(project: dict[str, str], root) -> None:
    root = Path(root)
    for path, text in project.items():
        target = root / path
        target.parent.mkdir(parents=True, exist_ok=True)
        target.write_text(text)


def read_project(root) -> dict[str, str]:
    root = Path(root)
    return {p.relative_to(root).as_posix(): p.read_text() for p in sorted(root.rglob("*.ml"))}
