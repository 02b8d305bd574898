"""Incremental maintenance of a compiled plan.

Every plan node becomes a caching network node.  Nodes exchange set-level
deltas (``row -> +1/-1``); projections and unions keep per-tuple support
counts so a tuple is emitted only when its count crosses zero.  A
transaction walks the strata in order:

* nodes outside recursion are maintained in node-id order, which is a
  topological order of the non-recursive part of the plan;
* the cyclic part of a recursive stratum runs delete/rederive: an
  over-delete phase, one rederivation step at every projection and union,
  then a semi-naive insertion phase.  Each phase runs in sweeps over the
  pending nodes in id order, and only the tuples new in the previous
  sweep are joined against the stable caches.

Built-in and chain nodes run at most once per transaction, in their
stratum, after all of their inputs are final.
"""

from __future__ import annotations

import time
from collections import defaultdict
from dataclasses import dataclass
from typing import Iterable, Mapping

from .builtins import REGISTRY, BuiltinNode
from .core import Delta, DeltaError, Relations, SchemaError, check_rows, format_snapshot
from .freshids import IdPool
from .naive import fold_aggregate
from .ra import RaNode, RaPlan, project_row, select_passes

Signed = dict  # row -> +1 / -1

# max tuples visited while searching for an alternative derivation
PROOF_BUDGET = 2000


@dataclass
class UpdateStats:
    tuples_propagated: int = 0
    nodes_activated: int = 0
    rederivation_attempts: int = 0
    iterations: int = 0
    builtin_calls: int = 0
    sink_changes: int = 0
    wall_time: float = 0.0


# ---------------------------------------------------------------------------
# network nodes


class _Node:
    op = ""

    def __init__(self, ra: RaNode):
        self.id = ra.id
        self.ra = ra
        self.params = ra.params
        self.out: set = set()

    def cache_size(self) -> int:
        return len(self.out)

    def _settle(self, res: dict) -> Signed:
        delta = {}
        for row, s in res.items():
            if s > 0 and row not in self.out:
                self.out.add(row)
                delta[row] = 1
            elif s < 0 and row in self.out:
                self.out.discard(row)
                delta[row] = -1
        return delta

    def rederive(self) -> tuple[list, int]:
        return [], 0


class _Select(_Node):
    op = "select"

    def push(self, pending: dict) -> Signed:
        conds = self.params["conds"]
        return self._settle({r: s for r, s in pending.get(0, {}).items() if select_passes(conds, r)})

    def delete(self, slot: int, rows: Iterable) -> list:
        gone = [r for r in rows if r in self.out]
        self.out.difference_update(gone)
        return gone

    def insert(self, slot: int, rows: Iterable) -> list:
        conds = self.params["conds"]
        new = [r for r in rows if r not in self.out and select_passes(conds, r)]
        self.out.update(new)
        return new


class _Counting(_Node):
    """Projection or union: ``counts[t]`` is the number of input tuples supporting ``t``.

    Inside a recursive stratum a projection also remembers which input
    tuples support each output (``support``) so the engine can search for
    an alternative derivation before over-deleting.
    """

    def __init__(self, ra: RaNode):
        super().__init__(ra)
        self.counts: dict = {}
        self.overdeleted: set = set()
        self.support: dict | None = None

    def track_support(self) -> None:
        self.support = defaultdict(set)

    def image(self, row):
        return row

    def cache_size(self) -> int:
        if self.support is not None:
            return len(self.counts) + sum(map(len, self.support.values()))
        return len(self.counts)

    def push(self, pending: dict) -> Signed:
        touched = set()
        counts = self.counts
        for slot in sorted(pending):
            for row, s in pending[slot].items():
                t = self.image(row)
                c = counts.get(t, 0) + s
                if c:
                    counts[t] = c
                else:
                    del counts[t]
                touched.add(t)
        delta = {}
        for t in touched:
            if t in counts and t not in self.out:
                self.out.add(t)
                delta[t] = 1
            elif t not in counts and t in self.out:
                self.out.discard(t)
                delta[t] = -1
        return delta

    def lose(self, slot: int, rows: Iterable) -> list:
        """Drop supporting input tuples; return outputs that lost support and are still present."""
        hit = []
        counts = self.counts
        for row in rows:
            t = self.image(row)
            c = counts[t] - 1
            if c:
                counts[t] = c
            else:
                del counts[t]
            if self.support is not None:
                self.support[t].discard(row)
                if not self.support[t]:
                    del self.support[t]
            if t in self.out:
                hit.append(t)
        return list(dict.fromkeys(hit))

    def overdelete(self, t) -> None:
        self.out.discard(t)
        self.overdeleted.add(t)

    def delete(self, slot: int, rows: Iterable) -> list:
        gone = self.lose(slot, rows)
        for t in gone:
            self.overdelete(t)
        return gone

    def rederive(self) -> tuple[list, int]:
        back = [t for t in self.overdeleted if t in self.counts and t not in self.out]
        self.out.update(back)
        attempts = len(self.overdeleted)
        self.overdeleted = set()
        return back, attempts

    def insert(self, slot: int, rows: Iterable) -> list:
        new = []
        counts = self.counts
        for row in rows:
            t = self.image(row)
            counts[t] = counts.get(t, 0) + 1
            if self.support is not None:
                self.support[t].add(row)
            if t not in self.out:
                self.out.add(t)
                new.append(t)
        return new


class _Project(_Counting):
    op = "project"

    def image(self, row):
        return project_row(self.params["cols"], row)


class _Union(_Counting):
    op = "union"


class _Join(_Node):
    op = "join"

    def __init__(self, ra: RaNode):
        super().__init__(ra)
        self.index = (defaultdict(set), defaultdict(set))
        self.keys = (ra.params["lkeys"], ra.params["rkeys"])

    def cache_size(self) -> int:
        return len(self.out) + sum(len(s) for side in self.index for s in side.values())

    def _pair(self, slot: int, row, other):
        return row + other if slot == 0 else other + row

    def push(self, pending: dict) -> Signed:
        res: dict = defaultdict(int)
        for slot in (0, 1):
            own, other = self.index[slot], self.index[1 - slot]
            keys = self.keys[slot]
            for row, s in pending.get(slot, {}).items():
                key = tuple(row[k] for k in keys)
                for o in other.get(key, ()):
                    res[self._pair(slot, row, o)] += s
                if s > 0:
                    own[key].add(row)
                else:
                    bucket = own[key]
                    bucket.discard(row)
                    if not bucket:
                        del own[key]
        return self._settle(res)

    def delete(self, slot: int, rows: Iterable) -> list:
        own, other = self.index[slot], self.index[1 - slot]
        keys = self.keys[slot]
        gone = []
        for row in rows:
            key = tuple(row[k] for k in keys)
            for o in other.get(key, ()):
                t = self._pair(slot, row, o)
                if t in self.out:
                    self.out.discard(t)
                    gone.append(t)
            bucket = own.get(key)
            if bucket is not None:
                bucket.discard(row)
                if not bucket:
                    del own[key]
        return gone

    def insert(self, slot: int, rows: Iterable) -> list:
        own, other = self.index[slot], self.index[1 - slot]
        keys = self.keys[slot]
        new = []
        for row in rows:
            key = tuple(row[k] for k in keys)
            own[key].add(row)
            for o in other.get(key, ()):
                t = self._pair(slot, row, o)
                if t not in self.out:
                    self.out.add(t)
                    new.append(t)
        return new


class _Antijoin(_Node):
    """Left tuples whose key is absent from the right input.

    In the delete/rederive phases the right slot is inverted: a right
    insertion removes output and arrives with the deletions.
    """

    op = "antijoin"

    def __init__(self, ra: RaNode):
        super().__init__(ra)
        self.left: dict = defaultdict(set)
        self.right: set = set()
        self.lkeys = ra.params["lkeys"]
        self.rkeys = ra.params["rkeys"]

    def cache_size(self) -> int:
        return len(self.out) + sum(map(len, self.left.values())) + len(self.right)

    def _lkey(self, row):
        return tuple(row[k] for k in self.lkeys)

    def _rkey(self, row):
        return tuple(row[k] for k in self.rkeys)

    def push(self, pending: dict) -> Signed:
        res: dict = defaultdict(int)
        for row, s in pending.get(0, {}).items():
            key = self._lkey(row)
            if key not in self.right:
                res[row] += s
            if s > 0:
                self.left[key].add(row)
            else:
                self.left[key].discard(row)
        for row, s in pending.get(1, {}).items():
            key = self._rkey(row)
            if s > 0:
                self.right.add(key)
            else:
                self.right.discard(key)
            for l in self.left.get(key, ()):
                res[l] -= s
        return self._settle(res)

    def delete(self, slot: int, rows: Iterable) -> list:
        gone = []
        if slot == 0:
            for row in rows:
                self.left[self._lkey(row)].discard(row)
                if row in self.out:
                    self.out.discard(row)
                    gone.append(row)
        else:
            for row in rows:
                key = self._rkey(row)
                self.right.add(key)
                for l in self.left.get(key, ()):
                    if l in self.out:
                        self.out.discard(l)
                        gone.append(l)
        return gone

    def insert(self, slot: int, rows: Iterable) -> list:
        new = []
        if slot == 0:
            for row in rows:
                key = self._lkey(row)
                self.left[key].add(row)
                if key not in self.right and row not in self.out:
                    self.out.add(row)
                    new.append(row)
        else:
            for row in rows:
                key = self._rkey(row)
                self.right.discard(key)
                for l in self.left.get(key, ()):
                    if l not in self.out:
                        self.out.add(l)
                        new.append(l)
        return new


class _Fresh(_Node):
    op = "fresh"

    def __init__(self, ra: RaNode, pool: IdPool):
        super().__init__(ra)
        self.pool = pool

    def _extend(self, row):
        return row + (self.pool.number_tuple(self.params["ctor"], tuple(row[a] for a in self.params["args"])),)

    def push(self, pending: dict) -> Signed:
        d = pending.get(0, {})
        return self._settle({self._extend(r): d[r] for r in sorted(d)})

    def delete(self, slot: int, rows: Iterable) -> list:
        gone = [t for t in map(self._extend, rows) if t in self.out]
        self.out.difference_update(gone)
        return gone

    def insert(self, slot: int, rows: Iterable) -> list:
        new = [t for t in map(self._extend, sorted(rows)) if t not in self.out]
        self.out.update(new)
        return new


class _Aggregate(_Node):
    op = "aggregate"

    def __init__(self, ra: RaNode):
        super().__init__(ra)
        self.groups: dict = defaultdict(set)
        self.values: dict = {}

    def cache_size(self) -> int:
        return len(self.out) + sum(map(len, self.groups.values()))

    def push(self, pending: dict) -> Signed:
        keys = self.params["keys"]
        touched = set()
        for row, s in pending.get(0, {}).items():
            key = tuple(row[k] for k in keys)
            if s > 0:
                self.groups[key].add(row)
            else:
                self.groups[key].discard(row)
            touched.add(key)
        delta = {}
        for key in touched:
            old = self.values.get(key)
            members = self.groups.get(key)
            if members:
                new = fold_aggregate(self.params["func"], members, self.params["value"], self.params["order"])
                self.values[key] = new
            else:
                new = None
                self.values.pop(key, None)
                self.groups.pop(key, None)
            if old == new:
                continue
            if old is not None:
                self.out.discard(key + (old,))
                delta[key + (old,)] = -1
            if new is not None:
                self.out.add(key + (new,))
                delta[key + (new,)] = 1
        return delta


class _Empty(_Node):
    op = "empty"

    def push(self, pending: dict) -> Signed:
        return {}


class _Builtin(_Node):
    op = "builtin"

    def __init__(self, ra: RaNode, location: str):
        super().__init__(ra)
        self.inner = BuiltinNode(ra.id, REGISTRY[ra.params["name"]], list(ra.inputs), location)
        self.out = self.inner.out

    def push(self, pending: dict) -> Signed:
        delta = self.inner.process(pending)
        self.out = self.inner.out
        return delta

    def cache_size(self) -> int:
        return self.inner.cache_size()


def _make_node(ra: RaNode, pool: IdPool) -> _Node:
    if ra.op == "select":
        return _Select(ra)
    if ra.op == "project":
        return _Project(ra)
    if ra.op == "union":
        return _Union(ra)
    if ra.op == "join":
        return _Join(ra)
    if ra.op == "antijoin":
        return _Antijoin(ra)
    if ra.op == "fresh":
        return _Fresh(ra, pool)
    if ra.op == "aggregate":
        return _Aggregate(ra)
    if ra.op == "builtin":
        return _Builtin(ra, f"node {ra.id}")
    if ra.op == "empty":
        return _Empty(ra)
    raise ValueError(f"no network node for {ra.op}")


def _accumulate(pending: dict, nid: int, slot: int, delta: Mapping) -> None:
    slots = pending.setdefault(nid, {})
    cur = slots.get(slot)
    if cur is None:
        slots[slot] = dict(delta)
        return
    for row, s in delta.items():
        v = cur.get(row, 0) + s
        if v:
            cur[row] = v
        else:
            del cur[row]


# ---------------------------------------------------------------------------
# engine state


class EngineState:
    """A stabilized network plus the current EDB.  Single writer."""

    def __init__(self, plan: RaPlan, pool: IdPool | None = None, partition=None):
        self.plan = plan
        self.pool = pool if pool is not None else IdPool()
        self.partition = partition
        self.types = plan.types
        self.db: Relations = {rel: set() for rel in plan.edb}
        self.nodes: dict[int, object] = {}
        self.chains: list = []
        skipped = set()
        if partition is not None:
            skipped = {p for chain in partition.chains for p in chain.members}
        stratum_of_pred = {p: g.index for g in plan.strata for p in g.members}
        skipped_strata = {stratum_of_pred[p] for p in skipped}
        for nid in sorted(plan.nodes):
            ra = plan.nodes[nid]
            if ra.op == "scan" or ra.stratum in skipped_strata:
                continue
            self.nodes[nid] = _make_node(ra, self.pool)
        self.stratum_of: dict[int, int] = {nid: plan.nodes[nid].stratum for nid in self.nodes}
        # who emits each IDB relation
        self.emitter: dict[str, int] = {p: s for p, s in plan.sinks.items() if p not in skipped}
        self.scan_consumers: dict[str, list[tuple[int, int]]] = defaultdict(list)
        self.consumers: dict[int, list[tuple[int, int]]] = defaultdict(list)
        scan_pred = {s: p for p, s in plan.scans.items()}
        for nid in self.nodes:
            for slot, src in enumerate(plan.nodes[nid].inputs):
                if src in scan_pred:
                    self.scan_consumers[scan_pred[src]].append((nid, slot))
                else:
                    self.consumers[src].append((nid, slot))
        if partition is not None:
            from .hybrid import ChainNode

            next_id = max(plan.nodes, default=-1) + 1
            for chain in partition.chains:
                node = ChainNode(next_id, chain, partition, self.db, self.pool)
                self.nodes[next_id] = node
                self.stratum_of[next_id] = node.stratum
                self.emitter[chain.boundary] = next_id
                for slot, pred in enumerate(node.input_preds):
                    self.scan_consumers[pred].append((next_id, slot))
                self.chains.append(node)
                next_id += 1
        self.pred_of_emitter = {nid: p for p, nid in self.emitter.items()}
        for pred, nid in self.emitter.items():
            self.db[pred] = self.nodes[nid].out
        self.by_stratum: dict[int, list[int]] = defaultdict(list)
        for nid in sorted(self.nodes):
            self.by_stratum[self.stratum_of[nid]].append(nid)
        self.cyclic: dict[int, set[int]] = {}
        for g in plan.strata:
            self.cyclic[g.index] = {n for n in g.cyclic if n in self.nodes} if g.recursive else set()
            for nid in self.cyclic[g.index]:
                if isinstance(self.nodes[nid], _Project):
                    self.nodes[nid].track_support()
        self.scan_pred = scan_pred
        self.proof_budget = PROOF_BUDGET
        self.initialized = False
        self.transactions = 0

    # public API -----------------------------------------------------------

    def initialize(self, edb: Mapping[str, Iterable]) -> UpdateStats:
        if self.initialized:
            raise DeltaError("engine already initialized")
        delta = Delta.of(inserts={rel: rows for rel, rows in edb.items()})
        stats = self._transaction(delta, force=True)
        self.initialized = True
        return stats

    def apply_delta(self, delta: Delta) -> UpdateStats:
        if not self.initialized:
            raise DeltaError("engine not initialized")
        return self._transaction(delta, force=False)

    def relation(self, pred: str) -> set:
        if pred in self.db:
            return self.db[pred]
        for chain in self.chains:
            if pred in chain.members:
                return chain.member_relation(pred)
        if pred in self.plan.sinks or pred in self.types:
            return set()
        raise KeyError(pred)

    def idb(self) -> Relations:
        """Current IDB; chain intermediates are recomputed on demand."""
        return {p: set(self.relation(p)) for p in self.plan.sinks}

    def edb(self) -> Relations:
        return {rel: set(self.db[rel]) for rel in self.plan.edb}

    def snapshot(self, relations: Iterable[str] | None = None) -> str:
        return format_snapshot(self.idb(), self.types, relations)

    def cache_size(self) -> int:
        return sum(node.cache_size() for node in self.nodes.values())

    def builtin_nodes(self) -> list[BuiltinNode]:
        return [n.inner for n in self.nodes.values() if isinstance(n, _Builtin)]

    # transaction ------------------------------------------------------------

    def _check_delta(self, delta: Delta) -> dict[str, Signed]:
        idb = set(self.plan.sinks)
        changes: dict[str, Signed] = {}
        for rel in delta.relations():
            if rel in idb:
                raise SchemaError(f"cannot update derived relation {rel}")
            if rel not in self.db:
                raise SchemaError(f"unknown relation {rel}")
            ins = delta.inserts.get(rel, set())
            dels = delta.deletes.get(rel, set())
            check_rows(rel, ins, self.types[rel])
            check_rows(rel, dels, self.types[rel])
            if ins & dels:
                raise DeltaError(f"{rel}: tuples both inserted and deleted")
            current = self.db[rel]
            missing = dels - current
            if missing:
                raise DeltaError(f"cannot delete absent tuple {rel}{min(missing)}")
            signed = {row: -1 for row in dels}
            signed.update((row, 1) for row in ins if row not in current)
            if signed:
                changes[rel] = signed
        return changes

    def _transaction(self, delta: Delta, force: bool) -> UpdateStats:
        start = time.perf_counter()
        changes = self._check_delta(delta)
        self.stats = UpdateStats()
        pending: dict[int, dict[int, Signed]] = {}
        for rel, signed in changes.items():
            rows = self.db[rel]
            for row, s in signed.items():
                if s > 0:
                    rows.add(row)
                else:
                    rows.discard(row)
            for nid, slot in self.scan_consumers.get(rel, ()):
                _accumulate(pending, nid, slot, signed)
        for g in self.plan.strata:
            self._run_stratum(g.index, pending, force)
        for node in self.builtin_nodes():
            self.stats.builtin_calls += node.calls_this_tx
            node.end_transaction()
        for chain in self.chains:
            chain.end_transaction()
        self.transactions += 1
        self.stats.wall_time = time.perf_counter() - start
        return self.stats

    def _emit(self, nid: int, delta: Signed, pending: dict) -> None:
        for cons, slot in self.consumers.get(nid, ()):
            _accumulate(pending, cons, slot, delta)
        pred = self.pred_of_emitter.get(nid)
        if pred is not None:
            self.stats.tuples_propagated += len(delta)
            self.stats.sink_changes += len(delta)
            for cons, slot in self.scan_consumers.get(pred, ()):
                _accumulate(pending, cons, slot, delta)

    def _run_stratum(self, index: int, pending: dict, force: bool) -> None:
        cyclic = self.cyclic.get(index, set())
        for nid in self.by_stratum.get(index, ()):
            if nid in cyclic:
                continue
            node = self.nodes[nid]
            slots = pending.pop(nid, None)
            if not slots and not (force and node.op in ("builtin", "chain")):
                continue
            self.stats.nodes_activated += 1
            delta = node.push(slots or {})
            if delta:
                self._emit(nid, delta, pending)
        if cyclic:
            self.delete_rederive(index, pending)

    # recursion ----------------------------------------------------------------

    def delete_rederive(self, index: int, pending: dict) -> None:
        """Maintain the cyclic part of stratum ``index`` from the pending deltas.

        Insertions are propagated first.  Deletions then over-delete, except
        that a tuple which still has support is kept when a bounded search
        finds a derivation of it from tuples that are currently present.
        Tuples whose supports survive are rederived one step, and the
        rederived tuples are propagated forward.
        """
        cyclic = self.cyclic[index]
        dels: dict[int, dict[int, set]] = {}
        ins: dict[int, dict[int, set]] = {}
        for nid in sorted(cyclic):
            slots = pending.pop(nid, None)
            if not slots:
                continue
            inverted = self.nodes[nid].op == "antijoin"
            for slot, d in slots.items():
                for row, s in d.items():
                    removes = (s < 0) != (inverted and slot == 1)
                    (dels if removes else ins).setdefault(nid, {}).setdefault(slot, set()).add(row)
        if not dels and not ins:
            return
        self._touched: dict[int, dict] = defaultdict(dict)
        self.fixpoint_seminaive(index, ins)
        self._sweep(dels, "delete", cyclic, removing=True)
        rederived: dict[int, dict[int, set]] = {}
        for nid in sorted(cyclic):
            back, attempts = self.nodes[nid].rederive()
            self.stats.rederivation_attempts += attempts
            if back:
                self._route(nid, back, rederived, cyclic, removing=False)
        self.fixpoint_seminaive(index, rederived)
        # publish net changes of the stratum's sinks downstream
        for nid, before in self._touched.items():
            out = self.nodes[nid].out
            net = {}
            for row, was in before.items():
                now = row in out
                if now != was:
                    net[row] = 1 if now else -1
            if not net:
                continue
            self.stats.sink_changes += len(net)
            pred = self.pred_of_emitter[nid]
            for cons, slot in self.scan_consumers.get(pred, ()):
                if cons not in cyclic:
                    _accumulate(pending, cons, slot, net)

    def fixpoint_seminaive(self, index: int, frontier: dict[int, dict[int, set]]) -> None:
        """Propagate only newly derived tuples, sweep by sweep, until nothing changes."""
        self._sweep(frontier, "insert", self.cyclic[index], removing=False)

    def _route(self, nid: int, rows: list, target: dict, cyclic: set, removing: bool) -> None:
        for cons, slot in self.consumers.get(nid, ()):
            target.setdefault(cons, {}).setdefault(slot, set()).update(rows)
        pred = self.pred_of_emitter.get(nid)
        if pred is None:
            return
        self.stats.tuples_propagated += len(rows)
        seen = self._touched[nid]
        for row in rows:
            seen.setdefault(row, removing)
        for cons, slot in self.scan_consumers.get(pred, ()):
            if cons in cyclic:
                target.setdefault(cons, {}).setdefault(slot, set()).update(rows)

    def _sweep(self, work: dict[int, dict[int, set]], method: str, cyclic: set, removing: bool) -> None:
        while work:
            self.stats.iterations += 1
            current = dict(work)
            work.clear()
            # one sweep in id order; emissions to higher ids join this sweep
            while current:
                nid = min(current)
                slots = current.pop(nid)
                node = self.nodes[nid]
                self.stats.nodes_activated += 1
                out: list = []
                for slot in sorted(slots):
                    if method == "delete" and isinstance(node, _Counting):
                        out.extend(self._lose_support(nid, node, slot, slots[slot], cyclic))
                    else:
                        out.extend(getattr(node, method)(slot, slots[slot]))
                if out:
                    routed: dict[int, dict[int, set]] = {}
                    self._route(nid, out, routed, cyclic, removing)
                    for cons, cslots in routed.items():
                        dest = current if cons > nid else work
                        for slot, rows in cslots.items():
                            dest.setdefault(cons, {}).setdefault(slot, set()).update(rows)

    def _lose_support(self, nid: int, node: _Counting, slot: int, rows: set, cyclic: set) -> list:
        gone = []
        for t in node.lose(slot, rows):
            if t in node.counts and self._rederivable(nid, t, cyclic):
                continue
            node.overdelete(t)
            gone.append(t)
        return gone

    # alternative-derivation search ------------------------------------------------

    def _rederivable(self, nid: int, t, cyclic: set) -> bool:
        self.stats.rederivation_attempts += 1
        ctx = _ProofSearch(self.proof_budget)
        try:
            return self._supported(nid, t, cyclic, ctx)
        except _BudgetExceeded:
            return False

    def _holds(self, nid: int, row, cyclic: set, ctx: "_ProofSearch") -> bool:
        """Is ``row`` in the output of ``nid`` with a derivation from present tuples?"""
        ctx.tick()
        pred = self.scan_pred.get(nid)
        if pred is not None:
            emitter = self.emitter.get(pred)
            if emitter is not None and emitter in cyclic:
                return self._supported(emitter, row, cyclic, ctx)
            return row in self.db[pred]
        node = self.nodes[nid]
        if row not in node.out:
            return False
        if nid not in cyclic:
            return True
        if isinstance(node, _Counting):
            return self._supported(nid, row, cyclic, ctx)
        inputs = node.ra.inputs
        if node.op == "select":
            return self._holds(inputs[0], row, cyclic, ctx)
        if node.op == "fresh":
            return self._holds(inputs[0], row[:-1], cyclic, ctx)
        if node.op == "join":
            split = self.plan.nodes[inputs[0]].arity
            return (self._holds(inputs[0], row[:split], cyclic, ctx)
                    and self._holds(inputs[1], row[split:], cyclic, ctx))
        if node.op == "antijoin":
            key = node._lkey(row)
            return key not in self._output_of(inputs[1]) and self._holds(inputs[0], row, cyclic, ctx)
        return False

    def _output_of(self, nid: int) -> set:
        pred = self.scan_pred.get(nid)
        return self.db[pred] if pred is not None else self.nodes[nid].out

    def _supported(self, nid: int, t, cyclic: set, ctx: "_ProofSearch") -> bool:
        key = (nid, t)
        known = ctx.memo.get(key)
        if known is not None:
            return known
        if key in ctx.visiting:
            return False
        ctx.visiting.add(key)
        node = self.nodes[nid]
        found = False
        if isinstance(node, _Project):
            source = node.ra.inputs[0]
            for row in list(node.support.get(t, ())):
                if self._holds(source, row, cyclic, ctx):
                    found = True
                    break
        else:
            for source in node.ra.inputs:
                if self._holds(source, t, cyclic, ctx):
                    found = True
                    break
        ctx.visiting.discard(key)
        if found:
            ctx.memo[key] = True
        return found


class _BudgetExceeded(Exception):
    pass


class _ProofSearch:
    def __init__(self, budget: int):
        self.budget = budget
        self.memo: dict = {}
        self.visiting: set = set()

    def tick(self) -> None:
        self.budget -= 1
        if self.budget < 0:
            raise _BudgetExceeded


def initialize(plan: RaPlan, edb: Mapping[str, Iterable], pool: IdPool | None = None, partition=None) -> EngineState:
    """Build the network for ``plan`` and stabilize it on ``edb``."""
    state = EngineState(plan, pool, partition)
    state.initialize(edb)
    return state


def apply_delta(state: EngineState, delta: Delta) -> UpdateStats:
    return state.apply_delta(delta)
