"""Static checks: declarations, typing, range restriction, stratification.

``check_program`` raises on the first batch of errors; ``stratify`` and
``reject_unsupported`` report problems as data.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

import networkx as nx

from .syntax import (
    Aggregate,
    Atom,
    BuiltinCall,
    Comparison,
    Const,
    FreshId,
    Negation,
    Program,
    Rule,
    Span,
    Term,
    Var,
    Wildcard,
    aggregate_keys,
    body_preds,
    literal_vars,
)


@dataclass(frozen=True)
class Diagnostic:
    code: str
    message: str
    span: Span | None = None

    def __str__(self) -> str:
        where = f"{self.span.line}:{self.span.col}: " if self.span else ""
        return f"{where}{self.code}: {self.message}"


class ValidationError(Exception):
    def __init__(self, diagnostics: list[Diagnostic]):
        self.diagnostics = diagnostics
        super().__init__("; ".join(str(d) for d in diagnostics))


@dataclass
class ProgramInfo:
    """Facts about a validated program that later stages need."""

    types: dict[str, tuple[str, ...]]
    edb: list[str]
    idb: list[str]

    def arity(self, pred: str) -> int:
        return len(self.types[pred])


def _builtin_registry():
    from ..builtins import REGISTRY

    return REGISTRY


# ---------------------------------------------------------------------------
# validation


def _positive_bound(rule: Rule) -> set[str]:
    """Variables bound by atoms, built-in calls and aggregates."""
    bound: set[str] = set()
    for i, lit in enumerate(rule.body):
        if isinstance(lit, (Atom, BuiltinCall)):
            bound.update(literal_vars(lit))
        elif isinstance(lit, Aggregate):
            bound.add(lit.result.name)
            bound.update(aggregate_keys(rule, i))
    return bound


def _check_rule_shape(rule: Rule, errors: list[Diagnostic]) -> None:
    span = rule.span
    bound = _positive_bound(rule)
    fresh_bound = {lit.result.name for lit in rule.body if isinstance(lit, FreshId)}
    for t in rule.head.args:
        if isinstance(t, Wildcard):
            errors.append(Diagnostic("head-wildcard", f"wildcard in head of {rule.head.pred}", span))
        elif isinstance(t, Var) and t.name not in bound and t.name not in fresh_bound:
            errors.append(Diagnostic(
                "range-restriction",
                f"range restriction: head variable {t.name} of {rule.head.pred} is not bound by a positive body literal",
                span))
    if not any(isinstance(lit, (Atom, BuiltinCall, Aggregate)) for lit in rule.body):
        errors.append(Diagnostic(
            "no-positive", f"rule for {rule.head.pred} needs a positive atom, built-in call or aggregate", span))
    for i, lit in enumerate(rule.body):
        if isinstance(lit, Negation):
            for v in literal_vars(lit):
                if v not in bound:
                    errors.append(Diagnostic(
                        "range-restriction",
                        f"range restriction: variable {v} in negated {lit.atom.pred} is not bound positively", span))
        elif isinstance(lit, Comparison):
            for t in (lit.left, lit.right):
                if isinstance(t, Wildcard):
                    errors.append(Diagnostic("comparison-wildcard", "wildcard in comparison", span))
                elif isinstance(t, Var) and t.name not in bound:
                    errors.append(Diagnostic(
                        "range-restriction",
                        f"range restriction: variable {t.name} in comparison is not bound positively", span))
        elif isinstance(lit, FreshId):
            if lit.result.name in bound or sum(
                    1 for o in rule.body if isinstance(o, FreshId) and o.result == lit.result) > 1:
                errors.append(Diagnostic("fresh-rebound", f"fresh-id variable {lit.result.name} is bound twice", span))
            for a in lit.args:
                if a.name not in bound:
                    errors.append(Diagnostic(
                        "range-restriction",
                        f"range restriction: argument {a.name} of new {lit.ctor} is not bound positively", span))
        elif isinstance(lit, Aggregate):
            inner = set(literal_vars(lit.atom))
            if lit.result.name in inner:
                errors.append(Diagnostic("aggregate-result", f"aggregate result {lit.result.name} occurs in its own body", span))
            for v in (lit.value, lit.order):
                if v is not None and v.name not in inner:
                    errors.append(Diagnostic("aggregate-var", f"aggregate variable {v.name} must occur in {lit.atom.pred}", span))
            if sum(1 for o in rule.body if isinstance(o, Aggregate) and o.result == lit.result) > 1:
                errors.append(Diagnostic("aggregate-result", f"aggregate result {lit.result.name} bound twice", span))


def _infer_rule_vars(
    rule: Rule, types: dict[str, tuple[str, ...]], errors: list[Diagnostic] | None
) -> tuple[dict[str, str], bool]:
    """Variable types of one rule; the flag is False while some body relation is untyped."""
    registry = _builtin_registry()
    vtypes: dict[str, str] = {}

    def assign(name: str, typ: str) -> None:
        old = vtypes.get(name)
        if old is None:
            vtypes[name] = typ
        elif old != typ and errors is not None:
            errors.append(Diagnostic("type-mismatch", f"variable {name} used as both {old} and {typ}", rule.span))

    def bind_args(args: tuple[Term, ...], col_types: tuple[str, ...], what: str) -> None:
        for t, ct in zip(args, col_types):
            if isinstance(t, Var):
                assign(t.name, ct)
            elif isinstance(t, Const) and t.kind != ct and errors is not None:
                errors.append(Diagnostic("type-mismatch", f"constant {t.value!r} is not of type {ct} in {what}", rule.span))

    complete = True
    for lit in rule.body:
        if isinstance(lit, (Atom, Negation)):
            atom = lit if isinstance(lit, Atom) else lit.atom
            if atom.pred not in types:
                complete = False
                continue
            bind_args(atom.args, types[atom.pred], atom.pred)
        elif isinstance(lit, BuiltinCall):
            spec = registry.get(lit.name)
            if spec is not None:
                bind_args(lit.args, spec.output_types, "@" + lit.name)
        elif isinstance(lit, Aggregate):
            if lit.atom.pred not in types:
                complete = False
                continue
            bind_args(lit.atom.args, types[lit.atom.pred], lit.atom.pred)
    for lit in rule.body:
        if isinstance(lit, Aggregate):
            if lit.func in ("count", "sum"):
                assign(lit.result.name, "int")
            elif lit.func == "concat":
                assign(lit.result.name, "string")
            elif lit.value is not None and lit.value.name in vtypes:
                assign(lit.result.name, vtypes[lit.value.name])
        elif isinstance(lit, FreshId):
            assign(lit.result.name, "id")
    return vtypes, complete


def _infer_types(program: Program, errors: list[Diagnostic]) -> dict[str, tuple[str, ...]]:
    types: dict[str, tuple[str, ...]] = {d.name: d.types for d in program.relations}
    idb = set(program.idb)
    changed = True
    while changed:
        changed = False
        for rule in program.rules:
            if rule.head.pred in types and rule.head.pred not in idb:
                continue
            # recursive rules may type their head from the already-typed part of the body
            partial, _ = _infer_rule_vars(rule, types, None)
            head_types: list[str | None] = []
            for t in rule.head.args:
                if isinstance(t, Var):
                    head_types.append(partial.get(t.name))
                elif isinstance(t, Const):
                    head_types.append(t.kind)
                else:
                    head_types.append(None)
            if rule.head.pred not in types and all(h is not None for h in head_types):
                types[rule.head.pred] = tuple(head_types)  # type: ignore[arg-type]
                changed = True
    for pred in program.idb:
        if pred not in types:
            errors.append(Diagnostic("untyped", f"cannot infer column types of {pred}"))
    return types


def _check_types(program: Program, types: dict[str, tuple[str, ...]], errors: list[Diagnostic]) -> None:
    registry = _builtin_registry()
    for rule in program.rules:
        vtypes, _ = _infer_rule_vars(rule, types, errors)
        head_types = types.get(rule.head.pred)
        if head_types is not None:
            for t, ct in zip(rule.head.args, head_types):
                got = vtypes.get(t.name) if isinstance(t, Var) else (t.kind if isinstance(t, Const) else None)
                if got is not None and got != ct:
                    errors.append(Diagnostic(
                        "type-mismatch", f"head of {rule.head.pred} expects {ct}, got {got}", rule.span))
        for lit in rule.body:
            if isinstance(lit, Comparison):
                lt = vtypes.get(lit.left.name) if isinstance(lit.left, Var) else getattr(lit.left, "kind", None)
                rt = vtypes.get(lit.right.name) if isinstance(lit.right, Var) else getattr(lit.right, "kind", None)
                if lt is not None and rt is not None and lt != rt:
                    errors.append(Diagnostic("type-mismatch", f"comparison between {lt} and {rt}", rule.span))
                if lit.op in ("<", "<=") and "id" in (lt, rt):
                    errors.append(Diagnostic("id-order", "ids compare only by equality", rule.span))
            elif isinstance(lit, Aggregate) and lit.value is not None:
                vt = vtypes.get(lit.value.name)
                if lit.func == "sum" and vt != "int":
                    errors.append(Diagnostic("aggregate-type", "sum needs an int value", rule.span))
                if lit.func == "concat" and vt != "string":
                    errors.append(Diagnostic("aggregate-type", "concat needs a string value", rule.span))
                if lit.func in ("min", "max") and vt == "id":
                    errors.append(Diagnostic("id-order", "ids compare only by equality", rule.span))
                if lit.order is not None and vtypes.get(lit.order.name) == "id":
                    errors.append(Diagnostic("id-order", "ids cannot order a concatenation", rule.span))
            elif isinstance(lit, BuiltinCall):
                spec = registry[lit.name]
                for inp, want in zip(lit.inputs, spec.input_types):
                    if inp in types and types[inp] != want:
                        errors.append(Diagnostic(
                            "builtin-type", f"@{lit.name} input {inp} must have columns {want}, has {types[inp]}",
                            rule.span))


def check_program(program: Program) -> ProgramInfo:
    """Validate ``program`` and return its typing information.

    Raises :class:`ValidationError` listing every problem found.
    """
    errors: list[Diagnostic] = []
    registry = _builtin_registry()
    edb: dict[str, int] = {}
    for d in program.relations:
        if d.name in edb:
            errors.append(Diagnostic("duplicate-decl", f"relation {d.name} declared twice", d.span))
        edb[d.name] = d.arity
    idb = program.idb
    arities: dict[str, int] = dict(edb)
    for rule in program.rules:
        if rule.head.pred in edb:
            errors.append(Diagnostic(
                "edb-defined", f"{rule.head.pred} is declared as input and also defined by a rule", rule.span))
    for rule in program.rules:
        atoms = [rule.head] + [lit if isinstance(lit, Atom) else lit.atom for lit in rule.body
                               if isinstance(lit, (Atom, Negation, Aggregate))]
        for atom in atoms:
            if atom.pred not in edb and atom.pred not in idb:
                errors.append(Diagnostic("undefined", f"undefined relation {atom.pred}", rule.span))
                continue
            known = arities.setdefault(atom.pred, atom.arity)
            if known != atom.arity:
                errors.append(Diagnostic(
                    "arity", f"{atom.pred} used with arity {atom.arity}, expected {known}", rule.span))
        for lit in rule.body:
            if isinstance(lit, BuiltinCall):
                spec = registry.get(lit.name)
                if spec is None:
                    errors.append(Diagnostic("unknown-builtin", f"unknown built-in @{lit.name}", rule.span))
                    continue
                if len(lit.inputs) != len(spec.input_types):
                    errors.append(Diagnostic(
                        "arity", f"@{lit.name} takes {len(spec.input_types)} input relations", rule.span))
                if len(lit.args) != len(spec.output_types):
                    errors.append(Diagnostic(
                        "arity", f"@{lit.name} produces {len(spec.output_types)} columns", rule.span))
                for inp in lit.inputs:
                    if inp not in edb and inp not in idb:
                        errors.append(Diagnostic("undefined", f"undefined relation {inp}", rule.span))
        _check_rule_shape(rule, errors)
    if errors:
        raise ValidationError(errors)
    types = _infer_types(program, errors)
    if not errors:
        _check_types(program, types, errors)
    if errors:
        raise ValidationError(errors)
    return ProgramInfo(types=types, edb=list(edb), idb=idb)


# ---------------------------------------------------------------------------
# stratification

NON_MONOTONIC = {
    "neg": "negation",
    "agg": "aggregate",
    "fresh": "fresh-id binding",
    "builtin": "built-in input",
}


def dependency_edges(program: Program) -> list[tuple[str, str, str, Rule]]:
    """``(body_pred, head_pred, kind, rule)`` for every dependency in the program."""
    edges = []
    for rule in program.rules:
        has_fresh = any(isinstance(lit, FreshId) for lit in rule.body)
        for lit in rule.body:
            if isinstance(lit, Atom):
                kind = "fresh" if has_fresh else "pos"
            elif isinstance(lit, Negation):
                kind = "neg"
            elif isinstance(lit, Aggregate):
                kind = "agg"
            elif isinstance(lit, BuiltinCall):
                kind = "builtin"
            else:
                continue
            for pred in body_preds(lit):
                edges.append((pred, rule.head.pred, kind, rule))
    return edges


def dependency_graph(program: Program) -> nx.DiGraph:
    g = nx.DiGraph()
    g.add_nodes_from(sorted({d.name for d in program.relations} | set(program.idb)))
    for src, dst, _kind, _rule in dependency_edges(program):
        g.add_edge(src, dst)
    return g


@dataclass(frozen=True)
class StratificationError:
    kind: str
    message: str
    cycle: tuple[str, ...]
    edge: tuple[str, str]
    span: Span | None = None


@dataclass
class StratificationReport:
    strata: list[frozenset[str]]
    errors: list[StratificationError] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.errors

    def stratum_of(self) -> dict[str, int]:
        return {p: i for i, s in enumerate(self.strata) for p in s}


def _condensation_order(g: nx.DiGraph) -> list[frozenset[str]]:
    sccs = [frozenset(c) for c in nx.strongly_connected_components(g)]
    index = {p: i for i, c in enumerate(sccs) for p in c}
    dag = nx.DiGraph()
    dag.add_nodes_from(range(len(sccs)))
    for u, v in g.edges:
        if index[u] != index[v]:
            dag.add_edge(index[u], index[v])
    order = nx.lexicographical_topological_sort(dag, key=lambda i: min(sccs[i]))
    return [sccs[i] for i in order]


def is_recursive(group: frozenset[str], g: nx.DiGraph) -> bool:
    if len(group) > 1:
        return True
    (p,) = group
    return g.has_edge(p, p)


def stratify(program: Program) -> StratificationReport:
    """Layer predicates into strata; non-monotonic edges inside a stratum are errors."""
    g = dependency_graph(program)
    strata = _condensation_order(g)
    where = {p: i for i, s in enumerate(strata) for p in s}
    errors: list[StratificationError] = []
    seen: set[tuple[str, str, str]] = set()
    for src, dst, kind, rule in dependency_edges(program):
        if kind == "pos" or where[src] != where[dst] or (src, dst, kind) in seen:
            continue
        seen.add((src, dst, kind))
        path = nx.shortest_path(g.subgraph(strata[where[src]]), dst, src)
        cycle = (src, *path)
        errors.append(StratificationError(
            kind=kind,
            message=f"{NON_MONOTONIC[kind]} inside recursive stratum: {' -> '.join(cycle)}",
            cycle=cycle,
            edge=(src, dst),
            span=rule.span,
        ))
    return StratificationReport(strata=strata, errors=errors)


def _odd_negation_path(g_signed: dict[str, list[tuple[str, int]]], start: str, goal: str) -> bool:
    """Is there a path start ~> goal crossing an odd number of negations?"""
    seen = {(start, 0)}
    stack = [(start, 0)]
    while stack:
        node, parity = stack.pop()
        if node == goal and parity == 1:
            return True
        for nxt, neg in g_signed.get(node, ()):
            state = (nxt, parity ^ neg)
            if state not in seen:
                seen.add(state)
                stack.append(state)
    return False


def reject_unsupported(program: Program) -> list[Diagnostic]:
    """One diagnostic per use of a deliberately unsupported feature."""
    g = dependency_graph(program)
    strata = _condensation_order(g)
    where = {p: i for i, s in enumerate(strata) for p in s}
    out: list[Diagnostic] = []
    signed: dict[str, list[tuple[str, int]]] = defaultdict(list)
    for src, dst, kind, _rule in dependency_edges(program):
        if where[src] == where[dst]:
            signed[src].append((dst, 1 if kind == "neg" else 0))
    for rule in program.rules:
        for lit in rule.body:
            if isinstance(lit, Aggregate) and where[lit.atom.pred] == where[rule.head.pred]:
                out.append(Diagnostic(
                    "recursive-aggregate",
                    "recursive aggregate: rewrite as fixpoint over explicit frontier "
                    f"({rule.head.pred} aggregates over {lit.atom.pred})",
                    rule.span))
            elif isinstance(lit, Negation) and where[lit.atom.pred] == where[rule.head.pred]:
                # even total parity through this edge means the cycle is parity-stratified
                if _odd_negation_path(signed, rule.head.pred, lit.atom.pred):
                    out.append(Diagnostic(
                        "parity-negation",
                        f"parity-stratified negation unsupported: {rule.head.pred} depends on itself "
                        f"under an even number of negations via not {lit.atom.pred}; "
                        "rewrite the doubly-negated recursion as a positive definition",
                        rule.span))
    return out
