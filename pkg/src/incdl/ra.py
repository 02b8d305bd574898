"""Compilation of stratified programs into relational-algebra plans.

Recursion is marked structurally (one :class:`RecursionGroup` per stratum)
and no semi-naive helper relations are generated; the network derives its
delta rules from the plan itself.

Column conventions: a join outputs ``left ++ right``; a select condition
is ``(lhs, op, rhs)`` with each side ``("col", i)`` or ``("const", v)``;
a projection entry is ``("col", i)`` or ``("const", v)``.
"""

from __future__ import annotations

import itertools
from collections import defaultdict
from dataclasses import dataclass, field
from typing import Mapping

from .builtins import REGISTRY
from .freshids import IdPool
from .lang.checks import ProgramInfo, StratificationReport, check_program, dependency_graph, is_recursive
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
from .naive import _compare, counted_atom, fold_aggregate

DEFAULT_ESTIMATE = 1000


class CompileError(Exception):
    pass


@dataclass(frozen=True)
class RaNode:
    id: int
    op: str
    inputs: tuple[int, ...]
    params: dict
    arity: int
    stratum: int

    def __hash__(self) -> int:
        return hash((self.id, self.op, self.inputs))


@dataclass(frozen=True)
class JoinOrderHint:
    rule_id: int
    order: tuple[int, ...]


@dataclass
class RecursionGroup:
    index: int
    members: frozenset[str]
    recursive: bool
    nodes: list[int] = field(default_factory=list)
    cyclic: list[int] = field(default_factory=list)
    entry_nodes: list[int] = field(default_factory=list)
    exit_nodes: list[int] = field(default_factory=list)


@dataclass
class RaPlan:
    nodes: dict[int, RaNode]
    strata: list[RecursionGroup]
    sinks: dict[str, int]
    scans: dict[str, int]
    types: dict[str, tuple[str, ...]]
    edb: list[str]
    hints: list[JoinOrderHint] = field(default_factory=list)
    program: Program | None = None  # source program, for oracle checks

    def consumers(self) -> dict[int, list[tuple[int, int]]]:
        """node id -> [(consumer id, input slot)], including sink -> scan wiring."""
        out: dict[int, list[tuple[int, int]]] = defaultdict(list)
        for node in self.nodes.values():
            for slot, src in enumerate(node.inputs):
                out[src].append((node.id, slot))
        for pred, scan in self.scans.items():
            if pred in self.sinks:
                out[self.sinks[pred]].append((scan, 0))
        return out

    @property
    def idb(self) -> list[str]:
        return list(self.sinks)


# ---------------------------------------------------------------------------
# join ordering


def _positive_indices(rule: Rule) -> list[int]:
    return [i for i, lit in enumerate(rule.body) if isinstance(lit, (Atom, BuiltinCall, Aggregate))]


def _literal_name(lit) -> str:
    if isinstance(lit, Atom):
        return lit.pred
    if isinstance(lit, Aggregate):
        return lit.atom.pred
    return "@" + lit.name


def _visible_vars(rule: Rule, index: int) -> set[str]:
    lit = rule.body[index]
    if isinstance(lit, Aggregate):
        return {lit.result.name, *aggregate_keys(rule, index)}
    return set(literal_vars(lit))


def order_joins(rule: Rule, stats: Mapping[str, int] | None = None, rule_id: int = 0) -> JoinOrderHint:
    """Greedy left-deep join order over the rule's positive literals.

    The estimated size of a prefix is the product of its literals'
    cardinalities, so each step adds the smallest remaining literal.
    Literals sharing a variable with the prefix are preferred over
    cross products.  Ties go to the lexicographically smaller relation
    name, then the lower literal index.
    """
    stats = stats or {}
    remaining = _positive_indices(rule)

    def estimate(i: int) -> int:
        return max(0, stats.get(_literal_name(rule.body[i]), DEFAULT_ESTIMATE))

    order: list[int] = []
    bound: set[str] = set()
    while remaining:
        connected = [i for i in remaining if _visible_vars(rule, i) & bound] if order else []
        pool = connected or remaining
        best = min(pool, key=lambda i: (estimate(i), _literal_name(rule.body[i]), i))
        order.append(best)
        remaining.remove(best)
        bound |= _visible_vars(rule, best)
    return JoinOrderHint(rule_id, tuple(order))


# ---------------------------------------------------------------------------
# lowering


class _Builder:
    def __init__(self, info: ProgramInfo):
        self.info = info
        self.nodes: dict[int, RaNode] = {}
        self.scans: dict[str, int] = {}
        self.stratum_of: dict[str, int] = {}
        self.current = 0

    def add(self, op: str, inputs: tuple[int, ...], params: dict, arity: int, stratum: int | None = None) -> int:
        nid = len(self.nodes)
        self.nodes[nid] = RaNode(nid, op, inputs, params, arity, self.current if stratum is None else stratum)
        return nid

    def scan(self, pred: str) -> int:
        if pred not in self.scans:
            self.scans[pred] = self.add("scan", (), {"pred": pred}, len(self.info.types[pred]),
                                        self.stratum_of[pred])
        return self.scans[pred]

    def pattern(self, source: int, args: tuple[Term, ...]) -> tuple[int, list[str]]:
        """Select constants/repeated variables, then project to distinct variables."""
        conds = []
        first: dict[str, int] = {}
        for pos, t in enumerate(args):
            if isinstance(t, Const):
                conds.append((("col", pos), "=", ("const", t.value)))
            elif isinstance(t, Var):
                if t.name in first:
                    conds.append((("col", pos), "=", ("col", first[t.name])))
                else:
                    first[t.name] = pos
        node = source
        if conds:
            node = self.add("select", (node,), {"conds": tuple(conds)}, len(args))
        names = list(first)
        cols = tuple(("col", first[v]) for v in names)
        if [c[1] for c in cols] != list(range(len(args))):
            node = self.add("project", (node,), {"cols": cols}, len(cols))
        return node, names

    def positive(self, rule: Rule, index: int) -> tuple[int, list[str]]:
        lit = rule.body[index]
        if isinstance(lit, Atom):
            return self.pattern(self.scan(lit.pred), lit.args)
        if isinstance(lit, BuiltinCall):
            spec = REGISTRY[lit.name]
            inputs = tuple(self.scan(p) for p in lit.inputs)
            node = self.add("builtin", inputs, {"name": lit.name}, spec.output_arity)
            return self.pattern(node, lit.args)
        assert isinstance(lit, Aggregate)
        inner, inner_vars = self.pattern(self.scan(lit.atom.pred), counted_atom(lit.atom).args)
        keys = aggregate_keys(rule, index)
        params = {
            "func": lit.func,
            "keys": tuple(inner_vars.index(k) for k in keys),
            "value": inner_vars.index(lit.value.name) if lit.value else None,
            "order": inner_vars.index(lit.order.name) if lit.order else None,
        }
        node = self.add("aggregate", (inner,), params, len(keys) + 1)
        return node, keys + [lit.result.name]

    def rule(self, rule: Rule, hint: JoinOrderHint) -> int:
        pending = [i for i, lit in enumerate(rule.body) if isinstance(lit, (Comparison, Negation))]
        cur = -1
        schema: list[str] = []
        for idx in hint.order:
            node, names = self.positive(rule, idx)
            if cur < 0:
                cur, schema = node, list(names)
            else:
                shared = [v for v in names if v in schema]
                params = {"lkeys": tuple(schema.index(v) for v in shared),
                          "rkeys": tuple(names.index(v) for v in shared)}
                cur = self.add("join", (cur, node), params, len(schema) + len(names))
                schema = schema + names
            for i in list(pending):
                if set(literal_vars(rule.body[i])) <= set(schema):
                    cur = self.filter(rule.body[i], cur, schema)
                    pending.remove(i)
        if pending:
            raise CompileError(f"unbound variables in rule for {rule.head.pred}")
        for lit in rule.body:
            if isinstance(lit, FreshId):
                params = {"ctor": lit.ctor, "args": tuple(schema.index(a.name) for a in lit.args)}
                cur = self.add("fresh", (cur,), params, len(schema) + 1)
                schema = schema + [lit.result.name]
        cols = []
        for t in rule.head.args:
            if isinstance(t, Var):
                cols.append(("col", schema.index(t.name)))
            else:
                cols.append(("const", t.value))
        return self.add("project", (cur,), {"cols": tuple(cols)}, len(cols))

    def filter(self, lit, cur: int, schema: list[str]) -> int:
        def side(t: Term):
            return ("col", schema.index(t.name)) if isinstance(t, Var) else ("const", t.value)

        if isinstance(lit, Comparison):
            cond = (side(lit.left), lit.op, side(lit.right))
            return self.add("select", (cur,), {"conds": (cond,)}, len(schema))
        atom = lit.atom
        # right side: the negated relation restricted by its constants, keyed by its variables
        conds = []
        first: dict[str, int] = {}
        for pos, t in enumerate(atom.args):
            if isinstance(t, Const):
                conds.append((("col", pos), "=", ("const", t.value)))
            elif isinstance(t, Var):
                if t.name in first:
                    conds.append((("col", pos), "=", ("col", first[t.name])))
                else:
                    first[t.name] = pos
        right = self.scan(atom.pred)
        if conds:
            right = self.add("select", (right,), {"conds": tuple(conds)}, atom.arity)
        names = list(first)
        right = self.add("project", (right,), {"cols": tuple(("col", first[v]) for v in names)}, len(names))
        params = {"lkeys": tuple(schema.index(v) for v in names), "rkeys": tuple(range(len(names)))}
        return self.add("antijoin", (cur, right), params, len(schema))


def compile_program(
    program: Program,
    report: StratificationReport,
    stats: Mapping[str, int] | None = None,
    info: ProgramInfo | None = None,
) -> RaPlan:
    """Lower ``program`` to a plan; ``stats`` maps relation names to estimated sizes."""
    if report.errors:
        raise CompileError(f"program is not stratified: {report.errors[0].message}")
    info = info or check_program(program)
    b = _Builder(info)
    b.stratum_of = report.stratum_of()
    graph = dependency_graph(program)
    rules_by_pred: dict[str, list[tuple[int, Rule]]] = defaultdict(list)
    for rid, rule in enumerate(program.rules):
        rules_by_pred[rule.head.pred].append((rid, rule))
    for rid, rule in enumerate(program.rules):
        for lit in rule.body:
            atom = lit if isinstance(lit, Atom) else getattr(lit, "atom", None)
            if atom is not None and atom.arity != len(info.types[atom.pred]):
                raise CompileError(f"arity mismatch for {atom.pred}")
    sinks: dict[str, int] = {}
    groups: list[RecursionGroup] = []
    hints: list[JoinOrderHint] = []
    for si, members in enumerate(report.strata):
        b.current = si
        group = RecursionGroup(si, members, is_recursive(members, graph) and bool(set(members) & set(rules_by_pred)))
        start = len(b.nodes)
        for pred in sorted(members):
            if pred not in rules_by_pred:
                continue
            outs = []
            for rid, rule in rules_by_pred[pred]:
                hint = order_joins(rule, stats, rid)
                hints.append(hint)
                outs.append(b.rule(rule, hint))
            sinks[pred] = b.add("union", tuple(outs), {"pred": pred}, len(info.types[pred]))
        group.nodes = [n for n in range(start, len(b.nodes)) if n in b.nodes]
        groups.append(group)
    plan = RaPlan(nodes=b.nodes, strata=groups, sinks=sinks, scans=b.scans, types=dict(info.types),
                  edb=list(info.edb), hints=sorted(hints, key=lambda h: h.rule_id), program=program)
    _finish_groups(plan)
    return plan


def compile(program: Program, report: StratificationReport, stats: Mapping[str, int] | None = None) -> RaPlan:  # noqa: A001
    return compile_program(program, report, stats)


def _finish_groups(plan: RaPlan) -> None:
    """Recompute per-group node lists, cyclic nodes and entry/exit points."""
    by_stratum: dict[int, list[int]] = defaultdict(list)
    for nid in sorted(plan.nodes):
        node = plan.nodes[nid]
        if node.op != "scan":
            by_stratum[node.stratum].append(nid)
    consumers = plan.consumers()
    for group in plan.strata:
        group.nodes = by_stratum.get(group.index, [])
        group.entry_nodes = sorted(plan.scans[p] for p in group.members if p in plan.scans and p in plan.sinks)
        group.exit_nodes = sorted(plan.sinks[p] for p in group.members if p in plan.sinks)
        cyclic: set[int] = set()
        if group.recursive:
            stack = list(group.entry_nodes)
            while stack:
                nid = stack.pop()
                for cons, _slot in consumers.get(nid, ()):
                    if cons not in cyclic and plan.nodes[cons].stratum == group.index:
                        cyclic.add(cons)
                        stack.append(cons)
            cyclic -= set(group.entry_nodes)
        group.cyclic = sorted(cyclic)


# ---------------------------------------------------------------------------
# constant folding


def _fold_cond(cond) -> bool | None:
    (lk, lv), op, (rk, rv) = cond
    if lk == "const" and rk == "const":
        return _compare(op, lv, rv)
    if lk == "col" and rk == "col" and lv == rv:
        return op in ("=", "<=")
    return None


def constant_fold(plan: RaPlan) -> RaPlan:
    """Fold constant conditions, propagate empty relations and drop unreachable nodes."""
    nodes: dict[int, RaNode] = {}
    alias: dict[int, int] = {}
    empty: set[int] = set()

    def res(nid: int) -> int:
        while nid in alias:
            nid = alias[nid]
        return nid

    def make_empty(node: RaNode) -> None:
        nodes[node.id] = RaNode(node.id, "empty", (), {}, node.arity, node.stratum)
        empty.add(node.id)

    for nid in sorted(plan.nodes):
        node = plan.nodes[nid]
        inputs = tuple(res(i) for i in node.inputs)
        node = RaNode(node.id, node.op, inputs, node.params, node.arity, node.stratum)
        ins_empty = [i in empty for i in inputs]
        if node.op == "select":
            kept = []
            dead = False
            for cond in node.params["conds"]:
                v = _fold_cond(cond)
                if v is False:
                    dead = True
                elif v is None:
                    kept.append(cond)
            if dead or ins_empty[0]:
                make_empty(node)
            elif not kept:
                alias[nid] = inputs[0]
            else:
                nodes[nid] = RaNode(nid, "select", inputs, {"conds": tuple(kept)}, node.arity, node.stratum)
        elif node.op in ("project", "aggregate", "fresh", "join") and any(ins_empty):
            make_empty(node)
        elif node.op == "antijoin" and ins_empty[0]:
            make_empty(node)
        elif node.op == "antijoin" and ins_empty[1]:
            alias[nid] = inputs[0]
        elif node.op == "union":
            live = tuple(i for i in inputs if i not in empty)
            nodes[nid] = RaNode(nid, "union", live, node.params, node.arity, node.stratum)
        else:
            nodes[nid] = node
    # reachability from sinks (scans of IDB relations are fed by their sinks)
    live: set[int] = set()
    stack = [plan.sinks[p] for p in plan.sinks]
    while stack:
        nid = stack.pop()
        if nid in live:
            continue
        live.add(nid)
        node = nodes[nid]
        stack.extend(node.inputs)
        if node.op == "scan" and node.params["pred"] in plan.sinks:
            stack.append(plan.sinks[node.params["pred"]])
    scans = {p: s for p, s in plan.scans.items() if s in live}
    folded = RaPlan(
        nodes={nid: nodes[nid] for nid in sorted(live)},
        strata=[RecursionGroup(g.index, g.members, g.recursive) for g in plan.strata],
        sinks=dict(plan.sinks), scans=scans, types=plan.types, edb=plan.edb, hints=plan.hints,
        program=plan.program)
    _finish_groups(folded)
    for g in folded.strata:
        g.recursive = g.recursive and bool(g.cyclic)
    return folded


# ---------------------------------------------------------------------------
# text dump and plan-level evaluation


def _fmt_param(value) -> str:
    if isinstance(value, tuple):
        return "(" + ",".join(_fmt_param(v) for v in value) + ")"
    if isinstance(value, str):
        return repr(value)
    return str(value)


def dump_plan(plan: RaPlan) -> str:
    lines = []
    for nid in sorted(plan.nodes):
        n = plan.nodes[nid]
        params = " ".join(f"{k}={_fmt_param(n.params[k])}" for k in sorted(n.params))
        inputs = ",".join(map(str, n.inputs))
        lines.append(f"{nid}\t{n.op}\t[{inputs}]\t{params}".rstrip())
    for g in plan.strata:
        kind = "recursive" if g.recursive else "flat"
        lines.append(f"stratum {g.index} {kind} {{{','.join(sorted(g.members))}}} "
                     f"entry=[{','.join(map(str, g.entry_nodes))}] exit=[{','.join(map(str, g.exit_nodes))}]")
    return "\n".join(lines) + "\n"


def select_passes(conds, row) -> bool:
    for (lk, lv), op, (rk, rv) in conds:
        a = row[lv] if lk == "col" else lv
        b = row[rv] if rk == "col" else rv
        if not _compare(op, a, b):
            return False
    return True


def project_row(cols, row) -> tuple:
    return tuple(row[v] if k == "col" else v for k, v in cols)


def _eval_node(node: RaNode, values: dict[int, set], pool: IdPool) -> set:
    p = node.params
    ins = [values[i] for i in node.inputs]
    if node.op == "empty":
        return set()
    if node.op == "select":
        return {r for r in ins[0] if select_passes(p["conds"], r)}
    if node.op == "project":
        return {project_row(p["cols"], r) for r in ins[0]}
    if node.op == "union":
        return set().union(*ins) if ins else set()
    if node.op == "join":
        index = defaultdict(list)
        for r in ins[1]:
            index[tuple(r[k] for k in p["rkeys"])].append(r)
        return {left + right for left in ins[0] for right in index.get(tuple(left[k] for k in p["lkeys"]), ())}
    if node.op == "antijoin":
        keys = {tuple(r[k] for k in p["rkeys"]) for r in ins[1]}
        return {r for r in ins[0] if tuple(r[k] for k in p["lkeys"]) not in keys}
    if node.op == "aggregate":
        groups = defaultdict(set)
        for r in ins[0]:
            groups[tuple(r[k] for k in p["keys"])].add(r)
        return {k + (fold_aggregate(p["func"], g, p["value"], p["order"]),) for k, g in groups.items()}
    if node.op == "fresh":
        return {r + (pool.number_tuple(p["ctor"], tuple(r[a] for a in p["args"])),) for r in ins[0]}
    if node.op == "builtin":
        return REGISTRY[p["name"]].evaluate([set(s) for s in ins])
    raise CompileError(f"cannot evaluate {node.op}")


def evaluate_plan(plan: RaPlan, edb: Mapping[str, set], pool: IdPool | None = None) -> dict[str, set]:
    """From-scratch naive evaluation of a plan, stratum by stratum."""
    pool = pool if pool is not None else IdPool()
    values: dict[int, set] = {}
    for pred, scan in plan.scans.items():
        if pred not in plan.sinks:
            values[scan] = set(edb.get(pred, set()))
    member_scans: dict[int, list[int]] = defaultdict(list)
    for pred, scan in plan.scans.items():
        if pred in plan.sinks:
            member_scans[plan.nodes[plan.sinks[pred]].stratum].append(scan)
    for group in plan.strata:
        for scan in member_scans.get(group.index, ()):
            values[scan] = set()
        while True:
            for nid in group.nodes:
                values[nid] = _eval_node(plan.nodes[nid], values, pool)
            changed = False
            for scan in member_scans.get(group.index, ()):
                sink_value = values[plan.sinks[plan.nodes[scan].params["pred"]]]
                if sink_value != values[scan]:
                    values[scan] = set(sink_value)
                    changed = True
            if not group.recursive or not changed:
                break
    return {pred: values[sink] for pred, sink in plan.sinks.items()}


def all_orders_cost(rule: Rule, stats: Mapping[str, int]) -> dict[tuple[int, ...], int]:
    """Sum of prefix-product estimates for every join order (for inspection)."""
    pos = _positive_indices(rule)
    out = {}
    for perm in itertools.permutations(pos):
        total, acc = 0, 1
        for i in perm:
            acc *= stats.get(_literal_name(rule.body[i]), DEFAULT_ESTIMATE)
            total += acc
        out[perm] = total
    return out
