"""Hybrid evaluation: batch-evaluated chains inside the incremental network.

A chain is a maximal sequence of non-recursive derived predicates in
which every member except the last feeds exactly one other predicate,
namely the next member.  The chain is re-evaluated from scratch with the
reference evaluator whenever one of its inputs changes, and only its last
member (the boundary) is cached and diffed.
"""

from __future__ import annotations

from collections import defaultdict
from dataclasses import dataclass, field

from .freshids import IdPool
from .lang.checks import StratificationReport, dependency_edges, dependency_graph, is_recursive
from .lang.syntax import Program
from .naive import evaluate_strata
from .ra import RaPlan


class ChainError(Exception):
    pass


@dataclass(frozen=True)
class Chain:
    index: int
    members: tuple[str, ...]

    @property
    def boundary(self) -> str:
        return self.members[-1]


@dataclass
class PartitionPlan:
    chains: list[Chain]
    incremental: set[str]
    edb_wrappers: set[str]
    program: Program = field(repr=False, default=None)
    report: StratificationReport = field(repr=False, default=None)

    def chain_of(self, pred: str) -> Chain | None:
        for chain in self.chains:
            if pred in chain.members:
                return chain
        return None


def _flows(program: Program) -> dict[str, set[str]]:
    """pred -> derived predicates whose rules read it (any literal kind)."""
    out: dict[str, set[str]] = defaultdict(set)
    for src, dst, _kind, _rule in dependency_edges(program):
        if src != dst:
            out[src].add(dst)
    return out


def partition(plan: RaPlan | None, report: StratificationReport, program: Program,
              per_predicate: bool = False) -> PartitionPlan:
    """Split predicates into chains, incrementally maintained ones and EDB inputs.

    When several predicates could extend a chain into the same successor,
    the lexicographically smallest one does and the others end their own
    chains.  ``per_predicate`` makes every non-recursive derived predicate
    its own chain.
    """
    graph = dependency_graph(program)
    idb = set(program.idb)
    recursive: set[str] = set()
    stratum: dict[str, int] = {}
    for i, group in enumerate(report.strata):
        for p in group:
            stratum[p] = i
        if is_recursive(group, graph):
            recursive |= set(group) & idb
    batch = sorted(idb - recursive)
    flows = _flows(program)
    succ: dict[str, str] = {}
    if not per_predicate:
        pred_of: dict[str, str] = {}
        for p in batch:
            targets = flows.get(p, set())
            if len(targets) == 1:
                (q,) = targets
                if q in idb and q not in recursive and q not in pred_of:
                    pred_of[q] = p
        succ = {p: q for q, p in pred_of.items()}
    has_pred = set(succ.values())
    chains: list[Chain] = []
    for start in batch:
        if start in has_pred:
            continue
        members = [start]
        while members[-1] in succ:
            members.append(succ[members[-1]])
        chains.append(Chain(len(chains), tuple(members)))
    return PartitionPlan(chains, recursive, set(program.edb), program, report)


def dump_partition(part: PartitionPlan) -> str:
    lines = []
    for chain in part.chains:
        lines.append(f"chain {chain.index}: {' -> '.join(chain.members)} (boundary {chain.boundary})")
    lines.append("incremental: " + " ".join(sorted(part.incremental)))
    lines.append("edb: " + " ".join(sorted(part.edb_wrappers)))
    return "\n".join(lines) + "\n"


class ChainNode:
    """Network node that batch-evaluates one chain and emits its boundary diff."""

    op = "chain"

    def __init__(self, node_id: int, chain: Chain, part: PartitionPlan, db: dict, pool: IdPool):
        self.id = node_id
        self.chain = chain
        self.program = part.program
        self.db = db
        self.pool = pool
        order = {p: i for i, group in enumerate(part.report.strata) for p in group}
        self.members = tuple(sorted(chain.members, key=order.__getitem__))
        self.stratum = order[chain.boundary]
        members = set(self.members)
        inputs = set()
        for src, dst, _kind, _rule in dependency_edges(self.program):
            if dst in members and src not in members:
                inputs.add(src)
        self.input_preds = sorted(inputs)
        self.out: set = set()
        self.evaluate_calls = 0
        self.calls_this_tx = 0
        self.max_calls_per_tx = 0
        self.initialized = False

    def _evaluate(self) -> dict:
        view = {p: self.db[p] for p in self.input_preds}
        try:
            evaluate_strata(self.program, [[m] for m in self.members], view, self.pool)
        except Exception as exc:  # noqa: BLE001 - tag with the chain
            raise ChainError(f"chain {self.chain.index} ({', '.join(self.members)}): {exc}") from exc
        return view

    def push(self, pending: dict) -> dict:
        if self.initialized and not any(pending.values()):
            return {}
        self.initialized = True
        result = self._evaluate()[self.chain.boundary]
        self.evaluate_calls += 1
        self.calls_this_tx += 1
        delta = {row: -1 for row in self.out - result}
        for row in result - self.out:
            delta[row] = 1
        self.out.intersection_update(result)
        self.out.update(result)
        return delta

    def member_relation(self, pred: str) -> set:
        if pred == self.chain.boundary:
            return self.out
        return self._evaluate()[pred]

    def end_transaction(self) -> None:
        self.max_calls_per_tx = max(self.max_calls_per_tx, self.calls_this_tx)
        self.calls_this_tx = 0

    def cache_size(self) -> int:
        return len(self.out)
