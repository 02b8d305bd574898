"""Trap files: label definitions plus tuple inserts, one directive per line.

    #0 = @"main.ml#r_1"        label bound to a global key
    #w = *                     label bound to a fresh local id
    func_def(#0, 'main')       tuple insert
    bump_id_counter            end-of-file marker for counter mode

Keys are node paths: the root of a file is ``r`` and each step down the
tree appends the 1-based child index, e.g. ``main.ml#r_1_3``.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from typing import Union

from .minilang import Node

# relation -> column types; the analysis declares these as its EDB
SCHEMA: dict[str, tuple[str, ...]] = {
    "file": ("id", "string"),
    "func_def": ("id", "string"),
    "param": ("id", "id", "int", "string"),
    "block": ("id",),
    "assign": ("id", "string", "id"),
    "while_stmt": ("id", "id", "id"),
    "if_stmt": ("id", "id", "id"),
    "else_branch": ("id", "id"),
    "return_stmt": ("id",),
    "return_value": ("id", "id"),
    "call": ("id", "string"),
    "arg": ("id", "int", "id"),
    "binop": ("id", "string", "id", "id"),
    "var_read": ("id", "string"),
    "lit_int": ("id", "int"),
    "lit_str": ("id", "string"),
    "parent": ("id", "id", "int"),
    "node_func": ("id", "id"),
    "location": ("id", "int"),
}


def schema_declarations() -> str:
    return "".join(f".decl {rel}({', '.join(types)}).\n" for rel, types in SCHEMA.items())


@dataclass(frozen=True)
class Label:
    name: str

    def __str__(self) -> str:
        return f"#{self.name}"


@dataclass(frozen=True)
class LabelDef:
    label: Label
    key: str | None  # None for a local "*" key


@dataclass(frozen=True)
class TupleInsert:
    relation: str
    args: tuple[Union[Label, int, str], ...]


@dataclass(frozen=True)
class BumpIdCounter:
    pass


Directive = Union[LabelDef, TupleInsert, BumpIdCounter]


@dataclass
class TrapFile:
    path: str
    directives: list[Directive]


class TrapSyntaxError(ValueError):
    pass


def node_key(path: str, node_path: tuple[int, ...]) -> str:
    return path + "#r" + "".join(f"_{i}" for i in node_path)


def _node_tuples(node: Node, label: dict[int, Label], fn: Label | None) -> list[TupleInsert]:
    me = label[id(node)]
    kids = [label[id(c)] for c in node.children]
    a = node.attrs
    k = node.kind
    if k == "file":
        return [TupleInsert("file", (me, a["path"]))]
    if k == "fn":
        return [TupleInsert("func_def", (me, a["name"]))]
    if k == "param":
        return [TupleInsert("param", (me, fn, a["index"], a["name"]))]
    if k == "block":
        return [TupleInsert("block", (me,))]
    if k == "assign":
        return [TupleInsert("assign", (me, a["var"], kids[0]))]
    if k == "while":
        return [TupleInsert("while_stmt", (me, kids[0], kids[1]))]
    if k == "if":
        out = [TupleInsert("if_stmt", (me, kids[0], kids[1]))]
        if len(kids) > 2:
            out.append(TupleInsert("else_branch", (me, kids[2])))
        return out
    if k == "return":
        out = [TupleInsert("return_stmt", (me,))]
        if kids:
            out.append(TupleInsert("return_value", (me, kids[0])))
        return out
    if k == "call":
        return [TupleInsert("call", (me, a["callee"]))] + [
            TupleInsert("arg", (me, i, kid)) for i, kid in enumerate(kids)]
    if k == "binop":
        return [TupleInsert("binop", (me, a["op"], kids[0], kids[1]))]
    if k == "var":
        return [TupleInsert("var_read", (me, a["name"]))]
    if k == "int":
        return [TupleInsert("lit_int", (me, a["value"]))]
    if k == "str":
        return [TupleInsert("lit_str", (me, a["value"]))]
    raise ValueError(f"unknown node kind {k}")


def extract_trap(ast: Node) -> TrapFile:
    """Label every node with its node-path key, then emit the schema tuples in preorder."""
    path = ast.attrs["path"]
    label: dict[int, Label] = {}
    defs: list[Directive] = []
    for n, (node_path, node) in enumerate(ast.walk()):
        label[id(node)] = Label(str(n))
        defs.append(LabelDef(label[id(node)], node_key(path, node_path)))
    tuples: list[Directive] = []

    def visit(node: Node, parent: Node | None, index: int, fn: Label | None) -> None:
        if node.kind == "fn":
            fn = label[id(node)]
        tuples.extend(_node_tuples(node, label, fn))
        me = label[id(node)]
        if parent is not None:
            tuples.append(TupleInsert("parent", (me, label[id(parent)], index)))
            tuples.append(TupleInsert("location", (me, node.line)))
        if fn is not None and node.kind != "fn":
            tuples.append(TupleInsert("node_func", (me, fn)))
        for i, child in enumerate(node.children, 1):
            visit(child, node, i, fn)

    visit(ast, None, 0, None)
    return TrapFile(path, defs + tuples + [BumpIdCounter()])


# ---------------------------------------------------------------------------
# text form


def _quote(value: str) -> str:
    return "'" + value.replace("\\", "\\\\").replace("'", "\\'").replace("\n", "\\n") + "'"


def _format_arg(arg) -> str:
    if isinstance(arg, Label):
        return str(arg)
    if isinstance(arg, str):
        return _quote(arg)
    return str(arg)


def format_trap(trap: TrapFile) -> str:
    lines = []
    for d in trap.directives:
        if isinstance(d, LabelDef):
            key = "*" if d.key is None else '@"' + d.key.replace("\\", "\\\\").replace('"', '\\"') + '"'
            lines.append(f"{d.label} = {key}")
        elif isinstance(d, TupleInsert):
            lines.append(f"{d.relation}({', '.join(_format_arg(a) for a in d.args)})")
        else:
            lines.append("bump_id_counter")
    return "\n".join(lines) + "\n"


_LABEL_DEF = re.compile(r'#(\w+)\s*=\s*(\*|@"((?:[^"\\]|\\.)*)")')
_TUPLE = re.compile(r"(\w+)\((.*)\)$")
_ARG = re.compile(r"\s*(#\w+|-?[0-9]+|'(?:[^'\\]|\\.)*')\s*(,|$)")
_UNESCAPE = re.compile(r"\\(.)")
_ESC = {"n": "\n"}


def parse_trap(text: str, path: str = "") -> TrapFile:
    directives: list[Directive] = []
    for lineno, raw in enumerate(text.splitlines(), 1):
        line = raw.strip()
        if not line:
            continue
        if line == "bump_id_counter":
            directives.append(BumpIdCounter())
        elif line.startswith("#"):
            pos = 0
            while pos < len(line):
                m = _LABEL_DEF.match(line, pos)
                if m is None:
                    raise TrapSyntaxError(f"{path}:{lineno}: bad label definition")
                key = None if m.group(2) == "*" else _UNESCAPE.sub(lambda e: e.group(1), m.group(3))
                directives.append(LabelDef(Label(m.group(1)), key))
                pos = m.end()
                rest = line[pos:].lstrip()
                if rest.startswith(","):
                    rest = rest[1:].lstrip()
                pos = len(line) - len(rest)
        else:
            m = _TUPLE.match(line)
            if m is None:
                raise TrapSyntaxError(f"{path}:{lineno}: bad directive {line!r}")
            body = m.group(2)
            args: list = []
            pos = 0
            while pos < len(body):
                a = _ARG.match(body, pos)
                if a is None:
                    raise TrapSyntaxError(f"{path}:{lineno}: bad argument list")
                tok = a.group(1)
                if tok.startswith("#"):
                    args.append(Label(tok[1:]))
                elif tok.startswith("'"):
                    args.append(_UNESCAPE.sub(lambda e: _ESC.get(e.group(1), e.group(1)), tok[1:-1]))
                else:
                    args.append(int(tok))
                pos = a.end()
            directives.append(TupleInsert(m.group(1), tuple(args)))
    return TrapFile(path, directives)
