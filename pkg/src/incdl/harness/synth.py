"""Synthesized change series over a MiniLang project."""

from __future__ import annotations

import difflib
import random
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping

import numpy as np

from ..frontend.minilang import Node, format_minilang, parse_minilang
from .projectgen import _Gen, make_function, read_project, write_project

KINDS = ("ide", "commit")
COMMIT_LAMBDA = 3.0


@dataclass
class CommitSeries:
    """Snapshot 0 is the baseline; ``changed_lines[i]`` compares snapshot i with i-1."""

    snapshots: list[dict[str, str]]
    changed_lines: list[int] = field(default_factory=list)

    def __post_init__(self) -> None:
        if not self.changed_lines:
            self.changed_lines = [0] + [changed_lines(a, b) for a, b in zip(self.snapshots, self.snapshots[1:])]

    def __len__(self) -> int:
        return len(self.snapshots)


def changed_lines(old: Mapping[str, str], new: Mapping[str, str]) -> int:
    """Added plus removed lines over all files, as a line diff reports them."""
    total = 0
    for path in sorted(set(old) | set(new)):
        a = old.get(path, "").splitlines()
        b = new.get(path, "").splitlines()
        if a == b:
            continue
        for op, i1, i2, j1, j2 in difflib.SequenceMatcher(None, a, b, autojunk=False).get_opcodes():
            if op != "equal":
                total += (i2 - i1) + (j2 - j1)
    return total


def _statement_slots(fn: Node) -> list[tuple[Node, int]]:
    """(block, index) for every statement position in ``fn``."""
    slots = []
    stack = [fn.children[-1]]
    while stack:
        block = stack.pop()
        for i, stmt in enumerate(block.children):
            slots.append((block, i))
            stack.extend(c for c in stmt.children if c.kind == "block")
    return slots


def _scope_at(fn: Node) -> list[str]:
    names = [p.attrs["name"] for p in fn.children[:-1]]
    for _, node in fn.walk():
        if node.kind == "assign" and node.attrs["var"] not in names:
            names.append(node.attrs["var"])
    return names


def _callees(trees: Mapping[str, Node]) -> list[tuple[str, int]]:
    out = []
    for tree in trees.values():
        for fn in tree.children:
            out.append((fn.attrs["name"], len(fn.children) - 1))
    return sorted(out)


class _Editor:
    def __init__(self, rng: random.Random, trees: dict[str, Node]):
        self.rng = rng
        self.trees = trees
        self.callees = _callees(trees)

    def functions(self) -> list[tuple[str, int]]:
        return [(path, i) for path in sorted(self.trees) for i in range(len(self.trees[path].children))]

    def gen(self) -> _Gen:
        pool = self.rng.sample(self.callees, min(2, len(self.callees)))
        return _Gen(self.rng, pool)

    def edit_expression(self, fn: Node) -> None:
        """Replace one expression, or insert or delete one simple statement."""
        scope = _scope_at(fn)
        slots = _statement_slots(fn)
        r = self.rng.random()
        with_expr = [(b, i) for b, i in slots if b.children[i].kind in ("assign", "return") and b.children[i].children]
        if with_expr and r < 0.5:
            block, i = self.rng.choice(with_expr)
            stmt = block.children[i]
            stmt.children[0] = self.gen().expr(scope)
        elif len(slots) > 1 and r < 0.75:
            block, i = self.rng.choice(slots)
            if len(block.children) > 1:
                del block.children[i]
            else:
                block.children[i] = self.gen().assign(scope)
        else:
            block, i = self.rng.choice(slots) if slots else (fn.children[-1], 0)
            block.children.insert(i, self.gen().assign(list(scope)))

    def edit_function(self, fn: Node) -> None:
        """Insert or remove a few statements."""
        scope = _scope_at(fn)
        gen = self.gen()
        if self.rng.random() < 0.6:
            # heavy-tailed: most edits are small, a few grow a function a lot
            for _ in range(min(40, int(self.rng.lognormvariate(1.0, 1.0)) + 1)):
                slots = _statement_slots(fn)
                block, i = self.rng.choice(slots) if slots else (fn.children[-1], 0)
                block.children.insert(i, gen.statement(scope))
        else:
            for _ in range(self.rng.randint(1, 3)):
                slots = [(b, i) for b, i in _statement_slots(fn) if len(b.children) > 1]
                if not slots:
                    break
                block, i = self.rng.choice(slots)
                del block.children[i]

    def add_function(self, path: str) -> None:
        tree = self.trees[path]
        taken = {name for name, _ in self.callees}
        n = len(taken)
        while f"g{n}" in taken:
            n += 1
        name = f"g{n}"
        fn = make_function(self.rng, name, self.rng.randint(0, 3), self.rng.sample(self.callees, min(2, len(self.callees))),
                           size=self.rng.randint(3, 20))
        tree.children.insert(self.rng.randint(0, len(tree.children)), fn)
        self.callees.append((name, len(fn.children) - 1))

    def remove_function(self, path: str, index: int) -> None:
        fn = self.trees[path].children.pop(index)
        self.callees.remove((fn.attrs["name"], len(fn.children) - 1))


def _parse_all(snapshot: Mapping[str, str]) -> dict[str, Node]:
    return {path: parse_minilang(text, path) for path, text in snapshot.items()}


def _format_all(trees: Mapping[str, Node]) -> dict[str, str]:
    return {path: format_minilang(tree) for path, tree in trees.items()}


def synthesize_changes(project: Mapping[str, str], kind: str = "commit", n: int = 10, seed: int = 0) -> CommitSeries:
    """``n`` successive changes on top of ``project``.

    ``ide`` edits one expression or one simple statement per change.
    ``commit`` edits a Poisson(3) number of functions per change; each edit
    inserts or removes statements, adds a function or removes one.
    """
    if kind not in KINDS:
        raise ValueError(f"unknown change kind {kind!r}; expected one of {KINDS}")
    rng = random.Random(seed)
    counts = np.random.default_rng(seed).poisson(COMMIT_LAMBDA, size=n)
    current = dict(project)
    trees = _parse_all(current)
    snapshots = [dict(current)]
    for step in range(n):
        editor = _Editor(rng, trees)
        fns = editor.functions()
        if kind == "ide":
            path, i = rng.choice(fns)
            editor.edit_expression(trees[path].children[i])
        else:
            touched = rng.sample(fns, min(len(fns), max(1, int(counts[step]))))
            # removals go last and from the back so earlier indices stay valid
            removals = []
            for path, i in touched:
                r = rng.random()
                if r < 0.7 or len(trees[path].children) < 2:
                    editor.edit_function(trees[path].children[i])
                elif r < 0.85:
                    editor.add_function(path)
                else:
                    removals.append((path, i))
            for path, i in sorted(removals, reverse=True):
                editor.remove_function(path, i)
        snapshots.append(_format_all(trees))
    return CommitSeries(snapshots)


# ---------------------------------------------------------------------------
# on disk: one directory per snapshot, named by index


def write_series(series: CommitSeries, root) -> None:
    root = Path(root)
    for i, snap in enumerate(series.snapshots):
        write_project(snap, root / f"{i:04d}")


def read_series(root) -> CommitSeries:
    root = Path(root)
    dirs = sorted(p for p in root.iterdir() if p.is_dir())
    if not dirs:
        raise FileNotFoundError(f"{root}: no snapshot directories")
    return CommitSeries([read_project(d) for d in dirs])


def differing_subtrees(a: Node, b: Node, path: tuple[int, ...] = ()) -> list[tuple[int, ...]]:
    """Node paths of the maximal subtrees where ``a`` and ``b`` differ."""
    if a.kind != b.kind or a.attrs != b.attrs or len(a.children) != len(b.children):
        return [path]
    out = []
    for i, (x, y) in enumerate(zip(a.children, b.children), 1):
        out.extend(differing_subtrees(x, y, path + (i,)))
    return out
