"""MiniLang: a tiny imperative language used as the analysis subject.

    file   := fn*
    fn     := "fn" NAME "(" [NAME ("," NAME)*] ")" block
    block  := "{" stmt* "}"
    stmt   := NAME "=" expr ";" | "while" "(" expr ")" block
            | "if" "(" expr ")" block ["else" block]
            | "return" [expr] ";" | call ";"
    expr   := sum (("==" | "!=" | "<" | "<=" | ">" | ">=") sum)?
    sum    := term (("+" | "-") term)*
    term   := atom (("*" | "/") atom)*
    atom   := INT | STRING | NAME | call | "(" expr ")"
    call   := NAME "(" [expr ("," expr)*] ")"

The AST is a plain tree of :class:`Node` values whose ``children`` order
defines node paths.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field


class MiniLangSyntaxError(SyntaxError):
    def __init__(self, message: str, path: str, line: int, col: int):
        super().__init__(f"{path}:{line}:{col}: {message}")
        self.filename = path
        self.lineno = line
        self.offset = col
        self.message = message


@dataclass
class Node:
    kind: str  # file fn param block assign while if return call binop var int str
    attrs: dict = field(default_factory=dict)
    children: list["Node"] = field(default_factory=list)
    line: int = 0

    def walk(self, path: tuple[int, ...] = ()):
        """Yield ``(node_path, node)`` in preorder; the root has the empty path."""
        yield path, self
        for i, child in enumerate(self.children, 1):
            yield from child.walk(path + (i,))


_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+) | (?P<nl>\n) | (?P<comment>//[^\n]*)
  | (?P<int>[0-9]+) | (?P<str>"(?:[^"\\\n]|\\.)*")
  | (?P<name>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<op>==|!=|<=|>=|[-+*/<>=(){},;])
""", re.VERBOSE)

KEYWORDS = {"fn", "while", "if", "else", "return"}
_ESC = {"n": "\n", "t": "\t", "\\": "\\", '"': '"'}


def _tokenize(source: str, path: str) -> list[tuple[str, str, int, int]]:
    out = []
    pos, line, start = 0, 1, 0
    while pos < len(source):
        m = _TOKEN.match(source, pos)
        if m is None:
            raise MiniLangSyntaxError(f"unexpected character {source[pos]!r}", path, line, pos - start + 1)
        kind = m.lastgroup
        if kind == "nl":
            line += 1
            start = m.end()
        elif kind not in ("ws", "comment"):
            text = m.group()
            if kind == "name" and text in KEYWORDS:
                kind = "kw"
            out.append((kind, text, line, pos - start + 1))
        pos = m.end()
    out.append(("eof", "", line, pos - start + 1))
    return out


class _Parser:
    def __init__(self, source: str, path: str):
        self.path = path
        self.toks = _tokenize(source, path)
        self.i = 0

    def peek(self, k: int = 0):
        return self.toks[min(self.i + k, len(self.toks) - 1)]

    def fail(self, message: str):
        _, text, line, col = self.peek()
        found = text or "end of file"
        return MiniLangSyntaxError(f"{message}, found {found!r}", self.path, line, col)

    def accept(self, text: str) -> bool:
        kind, t, _, _ = self.peek()
        if t == text and kind in ("op", "kw"):
            self.i += 1
            return True
        return False

    def expect(self, text: str):
        if not self.accept(text):
            raise self.fail(f"expected {text!r}")

    def name(self) -> str:
        kind, text, _, _ = self.peek()
        if kind != "name":
            raise self.fail("expected a name")
        self.i += 1
        return text

    def file(self) -> Node:
        root = Node("file", {"path": self.path}, [], 1)
        while self.peek()[0] != "eof":
            root.children.append(self.function())
        return root

    def function(self) -> Node:
        line = self.peek()[2]
        self.expect("fn")
        name = self.name()
        self.expect("(")
        params = []
        if not self.accept(")"):
            while True:
                pline = self.peek()[2]
                params.append(Node("param", {"name": self.name(), "index": len(params)}, [], pline))
                if self.accept(")"):
                    break
                self.expect(",")
        return Node("fn", {"name": name}, params + [self.block()], line)

    def block(self) -> Node:
        line = self.peek()[2]
        self.expect("{")
        stmts = []
        while not self.accept("}"):
            if self.peek()[0] == "eof":
                raise self.fail("expected '}'")
            stmts.append(self.statement())
        return Node("block", {}, stmts, line)

    def statement(self) -> Node:
        kind, text, line, _ = self.peek()
        if self.accept("while"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            return Node("while", {}, [cond, self.block()], line)
        if self.accept("if"):
            self.expect("(")
            cond = self.expr()
            self.expect(")")
            children = [cond, self.block()]
            if self.accept("else"):
                children.append(self.block())
            return Node("if", {}, children, line)
        if self.accept("return"):
            children = [] if self.peek()[1] == ";" else [self.expr()]
            self.expect(";")
            return Node("return", {}, children, line)
        if kind == "name" and self.peek(1)[1] == "=":
            self.i += 2
            rhs = self.expr()
            self.expect(";")
            return Node("assign", {"var": text}, [rhs], line)
        if kind == "name" and self.peek(1)[1] == "(":
            call = self.atom()
            self.expect(";")
            return call
        raise self.fail("expected a statement")

    def expr(self) -> Node:
        left = self.sum()
        kind, text, line, _ = self.peek()
        if kind == "op" and text in ("==", "!=", "<", "<=", ">", ">="):
            self.i += 1
            left = Node("binop", {"op": text}, [left, self.sum()], line)
        return left

    def sum(self) -> Node:
        left = self.term()
        while self.peek()[1] in ("+", "-") and self.peek()[0] == "op":
            _, op, line, _ = self.peek()
            self.i += 1
            left = Node("binop", {"op": op}, [left, self.term()], line)
        return left

    def term(self) -> Node:
        left = self.atom()
        while self.peek()[1] in ("*", "/") and self.peek()[0] == "op":
            _, op, line, _ = self.peek()
            self.i += 1
            left = Node("binop", {"op": op}, [left, self.atom()], line)
        return left

    def atom(self) -> Node:
        kind, text, line, col = self.peek()
        if kind == "int":
            self.i += 1
            return Node("int", {"value": int(text)}, [], line)
        if kind == "str":
            self.i += 1
            body = text[1:-1]
            value = re.sub(r"\\(.)", lambda m: _ESC.get(m.group(1), m.group(1)), body)
            return Node("str", {"value": value}, [], line)
        if kind == "name":
            self.i += 1
            if self.accept("("):
                args = []
                if not self.accept(")"):
                    while True:
                        args.append(self.expr())
                        if self.accept(")"):
                            break
                        self.expect(",")
                return Node("call", {"callee": text}, args, line)
            return Node("var", {"name": text}, [], line)
        if self.accept("("):
            inner = self.expr()
            self.expect(")")
            return inner
        raise self.fail("expected an expression")


def parse_minilang(source: str, path: str) -> Node:
    return _Parser(source, path).file()


# ---------------------------------------------------------------------------
# printing: one statement per line, so line diffs count edited statements


def _quote(value: str) -> str:
    return '"' + value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t") + '"'


_PREC = {"==": 1, "!=": 1, "<": 1, "<=": 1, ">": 1, ">=": 1, "+": 2, "-": 2, "*": 3, "/": 3}


def format_expr(node: Node, min_prec: int = 0) -> str:
    if node.kind == "int":
        return str(node.attrs["value"])
    if node.kind == "str":
        return _quote(node.attrs["value"])
    if node.kind == "var":
        return node.attrs["name"]
    if node.kind == "call":
        return f"{node.attrs['callee']}({', '.join(format_expr(a) for a in node.children)})"
    prec = _PREC[node.attrs["op"]]
    # arithmetic is left-associative; comparisons do not chain
    left = format_expr(node.children[0], prec if prec > 1 else prec + 1)
    right = format_expr(node.children[1], prec + 1)
    text = f"{left} {node.attrs['op']} {right}"
    return f"({text})" if prec < min_prec else text


def _format_block(block: Node, indent: int, lines: list[str]) -> None:
    pad = "    " * indent
    for stmt in block.children:
        if stmt.kind == "assign":
            lines.append(f"{pad}{stmt.attrs['var']} = {format_expr(stmt.children[0])};")
        elif stmt.kind == "return":
            lines.append(f"{pad}return {format_expr(stmt.children[0])};" if stmt.children else f"{pad}return;")
        elif stmt.kind == "call":
            lines.append(f"{pad}{format_expr(stmt)};")
        elif stmt.kind == "while":
            lines.append(f"{pad}while ({format_expr(stmt.children[0])}) {{")
            _format_block(stmt.children[1], indent + 1, lines)
            lines.append(f"{pad}}}")
        elif stmt.kind == "if":
            lines.append(f"{pad}if ({format_expr(stmt.children[0])}) {{")
            _format_block(stmt.children[1], indent + 1, lines)
            if len(stmt.children) > 2:
                lines.append(f"{pad}}} else {{")
                _format_block(stmt.children[2], indent + 1, lines)
            lines.append(f"{pad}}}")
        else:
            raise ValueError(f"not a statement: {stmt.kind}")


def format_function(fn: Node) -> list[str]:
    params = ", ".join(p.attrs["name"] for p in fn.children[:-1])
    lines = [f"fn {fn.attrs['name']}({params}) {{"]
    _format_block(fn.children[-1], 1, lines)
    lines.append("}")
    return lines


def format_minilang(root: Node) -> str:
    lines: list[str] = []
    for fn in root.children:
        lines.extend(format_function(fn))
    return "\n".join(lines) + ("\n" if lines else "")
