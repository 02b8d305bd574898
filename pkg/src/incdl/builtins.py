"""Non-incremental built-ins and the adapter that fits them into the network.

A wrapped built-in keeps full copies of its input relations.  When the
engine activates it (once per transaction, after every upstream stratum has
stabilized) it folds the incoming deltas into those copies, runs the
built-in on the complete inputs and emits only the difference against its
previous output.
"""

from __future__ import annotations

import heapq
from collections import defaultdict
from dataclasses import dataclass
from typing import Callable

import networkx as nx


class BuiltinError(Exception):
    pass


class NegativeWeight(BuiltinError):
    pass


class MultipleEntries(BuiltinError):
    pass


@dataclass(frozen=True)
class BuiltinSpec:
    name: str
    input_types: tuple[tuple[str, ...], ...]
    output_types: tuple[str, ...]
    evaluate: Callable[[list[set]], set]

    @property
    def input_arities(self) -> tuple[int, ...]:
        return tuple(len(t) for t in self.input_types)

    @property
    def output_arity(self) -> int:
        return len(self.output_types)


def builtin_shortest_path(edges: set) -> set:
    """All-pairs shortest distances over non-empty paths of weighted edges.

    Rows are ``(src, dst, dist)`` for every ``dst`` reachable from ``src``
    by at least one edge, so ``(s, s, d)`` appears only on a cycle.
    """
    adj: dict[int, dict[int, int]] = defaultdict(dict)
    for src, dst, w in edges:
        if w < 0:
            raise NegativeWeight(f"edge ({src}, {dst}) has negative weight {w}")
        if dst not in adj[src] or w < adj[src][dst]:
            adj[src][dst] = w
    out = set()
    for source in sorted(adj):
        dist: dict[int, int] = {}
        heap = [(w, dst) for dst, w in adj[source].items()]
        heapq.heapify(heap)
        while heap:
            d, node = heapq.heappop(heap)
            if node in dist:
                continue
            dist[node] = d
            for nxt, w in adj.get(node, {}).items():
                if nxt not in dist:
                    heapq.heappush(heap, (d + w, nxt))
        out.update((source, node, d) for node, d in dist.items())
    return out


def builtin_dominators(cfg_edges: set, entry: set) -> set:
    """Immediate-dominator pairs ``(node, idom)`` for nodes reachable from the entry."""
    if not entry:
        return set()
    if len(entry) > 1:
        raise MultipleEntries(f"expected one entry node, got {len(entry)}")
    ((root,),) = entry
    g = nx.DiGraph()
    g.add_node(root)
    g.add_edges_from(cfg_edges)
    idom = nx.immediate_dominators(g, root)
    return {(node, dom) for node, dom in idom.items() if node != root}


def builtin_string_concat_agg(groups: set, order_key: Callable[[tuple], object] | None = None) -> set:
    """Per group, the concatenation of its strings sorted by ``order_key`` (default: the string)."""
    members: dict[int, list[tuple]] = defaultdict(list)
    for row in groups:
        members[row[0]].append(row)
    key = order_key or (lambda row: row[1])
    return {(g, "".join(row[1] for row in sorted(rows, key=lambda r: (key(r), r)))) for g, rows in members.items()}


REGISTRY: dict[str, BuiltinSpec] = {
    "shortest_path": BuiltinSpec(
        "shortest_path", (("id", "id", "int"),), ("id", "id", "int"),
        lambda inputs: builtin_shortest_path(inputs[0])),
    "dominators": BuiltinSpec(
        "dominators", (("id", "id"), ("id",)), ("id", "id"),
        lambda inputs: builtin_dominators(inputs[0], inputs[1])),
    "concat": BuiltinSpec(
        "concat", (("id", "string"),), ("id", "string"),
        lambda inputs: builtin_string_concat_agg(inputs[0])),
}


class BuiltinNode:
    """Network node wrapping a :class:`BuiltinSpec`.

    ``process`` receives per-input net deltas.  It never evaluates when all
    of them are empty, except for the initial activation.
    """

    op = "builtin"

    def __init__(self, node_id: int, spec: BuiltinSpec, inputs: list[int], location: str = ""):
        self.id = node_id
        self.spec = spec
        self.inputs = inputs
        self.location = location
        self.last_inputs: list[set] = [set() for _ in inputs]
        self.out: set = set()
        self.initialized = False
        self.evaluate_calls = 0
        self.calls_this_tx = 0
        self.max_calls_per_tx = 0

    def process(self, pending: dict[int, dict]) -> dict:
        changed = not self.initialized
        for slot, delta in pending.items():
            rows = self.last_inputs[slot]
            for row, sign in delta.items():
                if sign > 0:
                    rows.add(row)
                else:
                    rows.discard(row)
                changed = True
        if not changed:
            return {}
        self.initialized = True
        try:
            result = self.spec.evaluate(self.last_inputs)
        except BuiltinError as exc:
            raise type(exc)(f"{self.location}: @{self.spec.name}: {exc}") from exc
        except Exception as exc:  # noqa: BLE001 - any failure inside a built-in
            raise BuiltinError(f"{self.location}: @{self.spec.name} failed: {exc}") from exc
        self.evaluate_calls += 1
        self.calls_this_tx += 1
        delta = {row: -1 for row in self.out - result}
        for row in result - self.out:
            delta[row] = 1
        self.out = result
        return delta

    def end_transaction(self) -> None:
        self.max_calls_per_tx = max(self.max_calls_per_tx, self.calls_this_tx)
        self.calls_this_tx = 0

    def cache_size(self) -> int:
        return len(self.out) + sum(map(len, self.last_inputs))


def wrap_builtin(spec: BuiltinSpec) -> Callable[..., BuiltinNode]:
    """Factory producing network nodes that run ``spec`` in batch-in, diff-out style."""

    def make(node_id: int, inputs: list[int], location: str = "") -> BuiltinNode:
        if len(inputs) != len(spec.input_types):
            raise BuiltinError(f"@{spec.name} takes {len(spec.input_types)} inputs, got {len(inputs)}")
        return BuiltinNode(node_id, spec, inputs, location)

    return make
