"""Acceptance criteria, each run at its stated tolerance.

Every test prints one PASS or FAIL line; the lines are repeated in the
pytest terminal summary.
"""

from __future__ import annotations

import random
import statistics
import time

import pytest
from scipy.stats import spearmanr

from incdl.core import impact
from incdl.freshids import IdPool
from incdl.frontend import build_edb, diff_edb, extract_trap, format_trap, parse_minilang
from incdl.harness import (
    BUCKETS,
    build_state,
    compare_relations,
    generate_project,
    load_analysis,
    pool_bijection,
    replay,
    synthesize_changes,
    verify,
)
from incdl.harness.randprog import random_delta, random_edb, random_program
from incdl.hybrid import dump_partition, partition
from incdl.lang import parse_program, stratify
from incdl.naive import evaluate_program

from conftest import FIXTURES, TC, delta, make_state, record

MODES = ("full", "hybrid", "per-predicate")


# ---------------------------------------------------------------------------
# randomized trials, shared by oracle equivalence and built-in discipline

ORACLE_TRIALS = 1000
ORACLE_DELTAS = 50
ORACLE_BUDGET_S = 600.0


@pytest.fixture(scope="module")
def oracle_run():
    rng = random.Random(20261014)
    failures: list[str] = []
    builtin_worst = 0
    builtin_nodes = 0
    start = time.perf_counter()
    for trial in range(ORACLE_TRIALS):
        rp = random_program(rng)
        assert len(rp.program.relations) <= 8
        mode = MODES[trial % len(MODES)]
        state = build_state(rp.program, mode)
        edb = random_edb(rng, rp.edb_types)
        assert sum(map(len, edb.values())) <= 200
        state.initialize(edb)
        current = {k: set(v) for k, v in edb.items()}
        for step in range(ORACLE_DELTAS):
            d = random_delta(rng, current, rp.edb_types)
            d.apply_to(current)
            state.apply_delta(d)
            result = verify(state, current, rp.program)
            if not result.ok:
                failures.append(f"trial {trial} step {step} ({mode}): {result.describe()}")
                break
        for node in state.builtin_nodes():
            builtin_nodes += 1
            builtin_worst = max(builtin_worst, node.max_calls_per_tx)
    elapsed = time.perf_counter() - start
    return failures, elapsed, builtin_worst, builtin_nodes


def test_oracle_equivalence(oracle_run):
    failures, elapsed, _, _ = oracle_run
    ok = not failures and elapsed < ORACLE_BUDGET_S
    record("oracle equivalence", ok,
           f"{ORACLE_TRIALS} trials x {ORACLE_DELTAS} deltas, {len(failures)} failures, {elapsed:.0f}s "
           f"(budget {ORACLE_BUDGET_S:.0f}s)" + (f"; first: {failures[0]}" if failures else ""))
    assert ok


def test_builtin_discipline(oracle_run):
    _, _, worst, nodes = oracle_run
    ok = worst <= 1 and nodes > 0
    record("built-in discipline", ok, f"{nodes} built-in nodes, at most {worst} evaluate call(s) per transaction")
    assert ok


# ---------------------------------------------------------------------------


def test_dred_diamond():
    state = make_state(TC, {"edge": {(1, 2), (2, 4), (1, 3), (3, 4)}})
    state.apply_delta(delta(deletes={"edge": {(2, 4)}}))
    path = state.relation("path")
    ok = path == {(1, 2), (1, 3), (3, 4), (1, 4)}
    record("DRed diamond", ok, f"path after deleting edge(2,4) = {sorted(path)}")
    assert ok


# ---------------------------------------------------------------------------

PROP_FUNCTIONS = 2000
PROP_EDITS = 10


@pytest.fixture(scope="module")
def proportionality_series():
    project = generate_project(PROP_FUNCTIONS, seed=7)
    return synthesize_changes(project, "ide", PROP_EDITS, seed=3)


@pytest.mark.parametrize("mode", ["full", "hybrid"])
def test_proportionality(proportionality_series, mode):
    program = load_analysis("taint")
    series = proportionality_series
    edb = build_edb(series.snapshots[0])
    state = build_state(program, mode, stats={r: len(v) for r, v in edb.items()})
    start = time.perf_counter()
    state.initialize(edb)
    init_s = time.perf_counter() - start
    oracle_pool = IdPool()
    old_idb = evaluate_program(program, edb, oracle_pool)
    times, worst_ratio, bad = [], 0.0, []
    for index, snapshot in enumerate(series.snapshots[1:], 1):
        new_edb = build_edb(snapshot)
        d = diff_edb(edb, new_edb)
        start = time.perf_counter()
        stats = state.apply_delta(d)
        times.append(time.perf_counter() - start)
        new_idb = evaluate_program(program, new_edb, oracle_pool)
        true_diff = impact(old_idb, new_idb)
        if stats.tuples_propagated > 4 * true_diff:
            bad.append(f"commit {index}: {stats.tuples_propagated} propagated vs diff {true_diff}")
        if true_diff:
            worst_ratio = max(worst_ratio, stats.tuples_propagated / true_diff)
        edb, old_idb = new_edb, new_idb
    median = statistics.median(times)
    ok = not bad and median <= init_s / 20
    record(f"proportionality ({mode})", ok,
           f"{PROP_FUNCTIONS} functions, worst propagated/diff {worst_ratio:.2f} (limit 4), "
           f"median update {median * 1000:.1f} ms vs init {init_s * 1000:.0f} ms "
           f"(limit {init_s * 1000 / 20:.0f} ms)" + (f"; {bad[0]}" if bad else ""))
    assert ok


# ---------------------------------------------------------------------------


def test_change_rate_correlation():
    project = generate_project(n_functions=200, seed=0)
    series = synthesize_changes(project, "commit", 100, seed=0)
    report = replay(series, load_analysis("taint"), timing=False)
    xs = [c.changed_lines for c in report.commits]
    ys = [c.idb_change_rate for c in report.commits]
    rho = spearmanr(xs, ys)[0]
    groups = [rows for rows in report.buckets().values() if rows]
    small = statistics.median(c.idb_change_rate for c in groups[0])
    large = statistics.median(c.idb_change_rate for c in groups[-1])
    names = [name for name, _, _ in BUCKETS if report.buckets()[name]]
    ok = rho >= 0.5 and small < large and len(groups) > 1
    record("change-rate correlation", ok,
           f"Spearman {rho:.3f} (limit 0.5); median rate {names[0]}: {small:.5f}, {names[-1]}: {large:.5f}")
    assert ok


# ---------------------------------------------------------------------------


def _owner(edb) -> dict[int, str]:
    """id -> path of the file whose nodes carry it."""
    file_ids = {row[0]: row[1] for row in edb["file"]}
    parent = {row[0]: row[1] for row in edb["parent"]}
    out = {}
    for node in set(parent) | set(file_ids):
        cur = node
        while cur not in file_ids:
            cur = parent[cur]
        out[node] = file_ids[cur]
    return out


def _file_rows(edb, owner, path):
    return {(rel, row) for rel, rows in edb.items() for row in rows if owner.get(row[0]) == path}


def test_id_stability():
    project = generate_project(n_functions=300, seed=11)
    series = synthesize_changes(project, "commit", 30, seed=11)
    problems = []
    checked = 0
    for old, new in zip(series.snapshots, series.snapshots[1:]):
        touched = {p for p in old if old[p] != new.get(p)} | (set(new) - set(old))
        untouched = set(old) - touched
        # node-path: no diff tuple whose ids are all owned by untouched files
        a, b = build_edb(old), build_edb(new)
        owner = {**_owner(a), **_owner(b)}
        d = diff_edb(a, b)
        for rels in (d.inserts, d.deletes):
            for rel, rows in rels.items():
                for row in rows:
                    ids = [v for v, t in zip(row, _id_columns(rel)) if t]
                    if ids and all(owner[v] in untouched for v in ids):
                        problems.append(f"node-path: {rel}{row}")
        # bump-counter: every untouched file keeps its exact rows and ids
        a, b = build_edb(old, "bump-counter"), build_edb(new, "bump-counter")
        oa, ob = _owner(a), _owner(b)
        for path in untouched:
            if _file_rows(a, oa, path) != _file_rows(b, ob, path):
                problems.append(f"bump-counter: ids of {path} changed")
        checked += 1
    ok = not problems
    record("id stability", ok, f"{checked} commits in both id modes, {len(problems)} violations"
           + (f"; first: {problems[0]}" if problems else ""))
    assert ok


def _id_columns(rel: str) -> tuple[bool, ...]:
    from incdl.frontend import SCHEMA

    return tuple(t == "id" for t in SCHEMA[rel])


# ---------------------------------------------------------------------------


def _agree(program, edb, deltas):
    """Run full and hybrid side by side; return (problem or None, per-step (full, hybrid) cache sizes)."""
    full = build_state(program, "full")
    hybrid = build_state(program, "hybrid")
    full.initialize(edb)
    hybrid.initialize(edb)
    sizes = [(full.cache_size(), hybrid.cache_size())]
    for step, d in enumerate([None] + deltas):
        if d is not None:
            full.apply_delta(d)
            hybrid.apply_delta(d)
            sizes.append((full.cache_size(), hybrid.cache_size()))
        result = compare_relations(full.idb(), hybrid.idb(), pool_bijection(full.pool, hybrid.pool))
        if not result.ok:
            return f"step {step}: {result.describe()}", sizes
    return None, sizes


def _chain_fixture_edb(rng):
    return {"p1": {(rng.randrange(8), rng.randrange(8)) for _ in range(30)}}


def test_hybrid_full_agreement():
    problems, cache_notes = [], []
    # fixtures: the taint analysis on the demo file and the chain-shape program
    taint = load_analysis("taint")
    demo = FIXTURES / "taint_demo.ml"
    series = synthesize_changes({demo.name: demo.read_text()}, "commit", 5, seed=1)
    edbs = [build_edb(s) for s in series.snapshots]
    fixtures = [("taint_demo", taint, edbs[0], [diff_edb(a, b) for a, b in zip(edbs, edbs[1:])])]
    rng = random.Random(5)
    chain = parse_program((FIXTURES / "chain_shape.idl").read_text())
    edb = _chain_fixture_edb(rng)
    steps, cur = [], {k: set(v) for k, v in edb.items()}
    for _ in range(10):
        nxt = _chain_fixture_edb(rng)
        steps.append(diff_edb(cur, nxt))
        cur = nxt
    fixtures.append(("chain_shape", chain, edb, steps))
    for name, program, edb, deltas in fixtures:
        problem, sizes = _agree(program, edb, deltas)
        if problem:
            problems.append(f"{name} {problem}")
        worse = [s for s in sizes if s[1] > s[0]]
        if worse:
            problems.append(f"{name}: hybrid caches {worse[0][1]} > full {worse[0][0]}")
        cache_notes.append(f"{name} cache full {sizes[0][0]} / hybrid {sizes[0][1]}")
    # random programs
    rng = random.Random(77)
    for trial in range(100):
        rp = random_program(rng)
        edb = random_edb(rng, rp.edb_types)
        cur = {k: set(v) for k, v in edb.items()}
        deltas = []
        for _ in range(10):
            d = random_delta(rng, cur, rp.edb_types)
            d.apply_to(cur)
            deltas.append(d)
        problem, _ = _agree(rp.program, edb, deltas)
        if problem:
            problems.append(f"random program {trial} {problem}")
    ok = not problems
    record("hybrid/full agreement", ok, f"2 fixtures + 100 random programs, {len(problems)} problems; "
           + "; ".join(cache_notes) + (f"; first: {problems[0]}" if problems else ""))
    assert ok


# ---------------------------------------------------------------------------


def test_chain_partition_golden():
    program = parse_program((FIXTURES / "chain_shape.idl").read_text())
    part = partition(None, stratify(program), program)
    chains = sorted(c.members for c in part.chains)
    ok = (chains == [("p2",), ("p3",), ("p4", "p7", "p8")] and part.incremental == {"p5", "p6"}
          and dump_partition(part) == (FIXTURES / "chain_shape.partition").read_text())
    record("chain partition golden", ok, f"chains {chains}, incremental {sorted(part.incremental)}")
    assert ok


def test_trap_golden():
    text = (FIXTURES / "taint_demo.ml").read_text()
    produced = format_trap(extract_trap(parse_minilang(text, "taint_demo.ml")))
    expected = (FIXTURES / "taint_demo.trap").read_text()
    ok = (produced == expected and '= @"taint_demo.ml#r' in produced
          and produced.rstrip("\n").splitlines()[-1] == "bump_id_counter")
    record("trap format golden", ok, f"{len(produced.splitlines())} lines, byte-identical: {produced == expected}")
    assert ok


if __name__ == "__main__":
    raise SystemExit(pytest.main([__file__, "-q"]))
