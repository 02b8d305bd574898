"""Reference evaluator: stratified naive fixpoint directly over the syntax tree.

It shares no code with the plan compiler or the incremental network, so
it serves as the oracle for both.  Hybrid mode also reuses it as the batch
evaluator for non-recursive chains.
"""

from __future__ import annotations

from collections import defaultdict
from typing import Iterable, Mapping

from .builtins import REGISTRY
from .core import Relations
from .freshids import IdPool
from .lang.checks import StratificationReport, stratify
from .lang.syntax import (
    Aggregate,
    Atom,
    BuiltinCall,
    Comparison,
    Const,
    FreshId,
    Negation,
    Program,
    Rule,
    Term,
    Var,
    Wildcard,
    aggregate_keys,
    literal_vars,
)


def _term_value(term: Term, binding: dict):
    return term.value if isinstance(term, Const) else binding[term.name]


def _compare(op: str, a, b) -> bool:
    if op == "=":
        return a == b
    if op == "!=":
        return a != b
    if op == "<":
        return a < b
    return a <= b


def match_atom(args: tuple[Term, ...], row: tuple, binding: dict) -> dict | None:
    """Extend ``binding`` so that ``args`` matches ``row``, or None."""
    out = binding
    copied = False
    for term, value in zip(args, row):
        if isinstance(term, Wildcard):
            continue
        if isinstance(term, Const):
            if term.value != value:
                return None
            continue
        bound = out.get(term.name, _MISSING)
        if bound is _MISSING:
            if not copied:
                out = dict(out)
                copied = True
            out[term.name] = value
        elif bound != value:
            return None
    return out


_MISSING = object()


def counted_atom(atom: Atom) -> Atom:
    """``atom`` with every wildcard named, so each matching row is aggregated once."""
    args = tuple(Var(f"_#{i}") if isinstance(t, Wildcard) else t for i, t in enumerate(atom.args))
    return Atom(atom.pred, args)


def aggregate_rows(agg: Aggregate, keys: list[str], rows: Iterable[tuple]) -> set:
    """The relation ``(keys..., result)`` an aggregate literal denotes."""
    atom = counted_atom(agg.atom)
    inner_vars: list[str] = []
    for v in literal_vars(atom):
        if v not in inner_vars:
            inner_vars.append(v)
    groups: dict[tuple, set] = defaultdict(set)
    for row in rows:
        b = match_atom(atom.args, row, {})
        if b is None:
            continue
        groups[tuple(b[k] for k in keys)].add(tuple(b[v] for v in inner_vars))
    pos = {v: i for i, v in enumerate(inner_vars)}
    out = set()
    for key, bindings in groups.items():
        out.add(key + (fold_aggregate(agg.func, bindings, pos.get(agg.value.name) if agg.value else None,
                                      pos.get(agg.order.name) if agg.order else None),))
    return out


def fold_aggregate(func: str, bindings: Iterable[tuple], value_col: int | None, order_col: int | None):
    """Aggregate a non-empty set of distinct binding tuples."""
    if func == "count":
        return sum(1 for _ in bindings)
    values = [b[value_col] for b in bindings] if func != "concat" else None
    if func == "sum":
        return sum(values)
    if func == "min":
        return min(values)
    if func == "max":
        return max(values)
    if order_col is None:
        ordered = sorted(b[value_col] for b in bindings)
    else:
        ordered = [v for _, v in sorted((b[order_col], b[value_col]) for b in bindings)]
    return "".join(ordered)


class _RuleEvaluator:
    def __init__(self, db: Mapping[str, set], pool: IdPool):
        self.db = db
        self.pool = pool
        self._builtin_cache: dict[tuple, set] = {}

    def relation_for(self, rule: Rule, index: int) -> tuple[tuple[Term, ...], set]:
        lit = rule.body[index]
        if isinstance(lit, Atom):
            return lit.args, self.db.get(lit.pred, set())
        if isinstance(lit, BuiltinCall):
            key = (lit.name, lit.inputs)
            if key not in self._builtin_cache:
                spec = REGISTRY[lit.name]
                self._builtin_cache[key] = spec.evaluate([set(self.db.get(i, set())) for i in lit.inputs])
            return lit.args, self._builtin_cache[key]
        assert isinstance(lit, Aggregate)
        keys = aggregate_keys(rule, index)
        rows = aggregate_rows(lit, keys, self.db.get(lit.atom.pred, set()))
        return tuple(Var(k) for k in keys) + (lit.result,), rows

    def evaluate(self, rule: Rule) -> set:
        positives = [i for i, lit in enumerate(rule.body) if isinstance(lit, (Atom, BuiltinCall, Aggregate))]
        rels = {i: self.relation_for(rule, i) for i in positives}
        bindings: list[dict] = [{}]
        bound: set[str] = set()
        remaining = list(positives)
        while remaining and bindings:
            # most-bound literal first; ties by position
            best = max(remaining, key=lambda i: (sum(1 for t in rels[i][0] if isinstance(t, Var) and t.name in bound)
                                                 + sum(1 for t in rels[i][0] if isinstance(t, Const)), -i))
            remaining.remove(best)
            args, rows = rels[best]
            key_pos = [p for p, t in enumerate(args)
                       if (isinstance(t, Var) and t.name in bound) or isinstance(t, Const)]
            index: dict[tuple, list] = defaultdict(list)
            for row in rows:
                index[tuple(row[p] for p in key_pos)].append(row)
            nxt = []
            for b in bindings:
                probe = tuple(_term_value(args[p], b) for p in key_pos)
                for row in index.get(probe, ()):
                    m = match_atom(args, row, b)
                    if m is not None:
                        nxt.append(m)
            bindings = nxt
            bound.update(t.name for t in args if isinstance(t, Var))
        for lit in rule.body:
            if isinstance(lit, Negation):
                rows = self.db.get(lit.atom.pred, set())
                cols = [p for p, t in enumerate(lit.atom.args) if not isinstance(t, Wildcard)]
                present = {tuple(row[p] for p in cols) for row in rows}
                bindings = [b for b in bindings
                            if tuple(_term_value(lit.atom.args[p], b) for p in cols) not in present]
            elif isinstance(lit, Comparison):
                bindings = [b for b in bindings
                            if _compare(lit.op, _term_value(lit.left, b), _term_value(lit.right, b))]
        for lit in rule.body:
            if isinstance(lit, FreshId):
                for b in bindings:
                    b[lit.result.name] = self.pool.number_tuple(lit.ctor, tuple(b[a.name] for a in lit.args))
        return {tuple(_term_value(t, b) for t in rule.head.args) for b in bindings}


def evaluate_strata(program: Program, strata: Iterable[Iterable[str]], db: Relations, pool: IdPool) -> Relations:
    """Evaluate the given strata in order, writing their relations into ``db``."""
    rules_by_pred: dict[str, list[Rule]] = defaultdict(list)
    for rule in program.rules:
        rules_by_pred[rule.head.pred].append(rule)
    for stratum in strata:
        preds = sorted(p for p in stratum if p in rules_by_pred)
        if not preds:
            continue
        for p in preds:
            db[p] = set()
        members = set(preds)
        recursive = any(isinstance(lit, Atom) and lit.pred in members
                        for p in preds for rule in rules_by_pred[p] for lit in rule.body)
        if not recursive:
            # nothing in the stratum reads itself, so one pass is the fixpoint
            ev = _RuleEvaluator(db, pool)
            for p in preds:
                for rule in rules_by_pred[p]:
                    db[p] |= ev.evaluate(rule)
            continue
        changed = True
        while changed:
            changed = False
            ev = _RuleEvaluator(db, pool)
            for p in preds:
                for rule in rules_by_pred[p]:
                    new = ev.evaluate(rule) - db[p]
                    if new:
                        db[p] |= new
                        changed = True
    return db


def evaluate_program(
    program: Program,
    edb: Mapping[str, set],
    pool: IdPool | None = None,
    report: StratificationReport | None = None,
) -> Relations:
    """From-scratch IDB of ``program`` over ``edb`` (IDB relations only)."""
    report = report or stratify(program)
    if report.errors:
        raise ValueError(f"program is not stratified: {report.errors[0].message}")
    pool = pool if pool is not None else IdPool()
    db: Relations = {rel: set(rows) for rel, rows in edb.items()}
    for d in program.relations:
        db.setdefault(d.name, set())
    evaluate_strata(program, report.strata, db, pool)
    return {p: db[p] for p in program.idb}
