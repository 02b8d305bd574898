"""Syntax tree for IncDL programs.

Every node is a frozen dataclass so programs compare structurally.  Source
positions are carried on rules for diagnostics but excluded from equality,
which keeps ``parse(print(parse(src))) == parse(src)`` meaningful.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Union

COLUMN_TYPES = ("id", "int", "string")
AGGREGATE_FUNCS = ("count", "sum", "min", "max", "concat")
COMPARISON_OPS = ("=", "!=", "<", "<=")


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Wildcard:
    pass


@dataclass(frozen=True)
class Const:
    value: int | str
    kind: str  # one of COLUMN_TYPES


Term = Union[Var, Wildcard, Const]


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[Term, ...]

    @property
    def arity(self) -> int:
        return len(self.args)


@dataclass(frozen=True)
class Negation:
    atom: Atom


@dataclass(frozen=True)
class Comparison:
    op: str
    left: Term
    right: Term


@dataclass(frozen=True)
class Aggregate:
    """``result = func [value] [order key] { atom }``.

    Group keys are the atom's variables that also occur outside the
    aggregate in the same rule.
    """

    result: Var
    func: str
    value: Var | None
    order: Var | None
    atom: Atom


@dataclass(frozen=True)
class FreshId:
    """``result = new Ctor(args...)``: numbers the argument tuple."""

    result: Var
    ctor: str
    args: tuple[Var, ...]


@dataclass(frozen=True)
class BuiltinCall:
    """``@name[input, ...](args...)``: an atom over a built-in's output."""

    name: str
    inputs: tuple[str, ...]
    args: tuple[Term, ...]


Literal = Union[Atom, Negation, Comparison, Aggregate, FreshId, BuiltinCall]


@dataclass(frozen=True)
class Span:
    line: int
    col: int


@dataclass(frozen=True)
class RelationDecl:
    name: str
    types: tuple[str, ...]
    span: Span | None = field(default=None, compare=False)

    @property
    def arity(self) -> int:
        return len(self.types)


@dataclass(frozen=True)
class Rule:
    head: Atom
    body: tuple[Literal, ...]
    span: Span | None = field(default=None, compare=False)


@dataclass(frozen=True)
class Program:
    relations: tuple[RelationDecl, ...]
    rules: tuple[Rule, ...]

    @property
    def edb(self) -> dict[str, RelationDecl]:
        return {d.name: d for d in self.relations}

    @property
    def idb(self) -> list[str]:
        seen: dict[str, None] = {}
        for rule in self.rules:
            seen.setdefault(rule.head.pred, None)
        return list(seen)


def term_vars(term: Term) -> list[str]:
    return [term.name] if isinstance(term, Var) else []


def literal_vars(lit: Literal) -> list[str]:
    """Variables a literal mentions (for aggregates: only result and group-visible vars)."""
    if isinstance(lit, (Atom, BuiltinCall)):
        return [v for t in lit.args for v in term_vars(t)]
    if isinstance(lit, Negation):
        return literal_vars(lit.atom)
    if isinstance(lit, Comparison):
        return term_vars(lit.left) + term_vars(lit.right)
    if isinstance(lit, Aggregate):
        return [lit.result.name] + literal_vars(lit.atom)
    if isinstance(lit, FreshId):
        return [lit.result.name] + [a.name for a in lit.args]
    raise TypeError(lit)


def body_preds(lit: Literal) -> list[str]:
    if isinstance(lit, Atom):
        return [lit.pred]
    if isinstance(lit, Negation):
        return [lit.atom.pred]
    if isinstance(lit, Aggregate):
        return [lit.atom.pred]
    if isinstance(lit, BuiltinCall):
        return list(lit.inputs)
    return []


def aggregate_keys(rule: Rule, index: int) -> list[str]:
    """Group-key variables of the aggregate at ``rule.body[index]``, in atom order."""
    agg = rule.body[index]
    assert isinstance(agg, Aggregate)
    outside: set[str] = set()
    for t in rule.head.args:
        outside.update(term_vars(t))
    for j, lit in enumerate(rule.body):
        if j != index:
            outside.update(literal_vars(lit))
    keys: list[str] = []
    for t in agg.atom.args:
        for v in term_vars(t):
            if v in outside and v not in keys:
                keys.append(v)
    return keys
