from __future__ import annotations

from incdl.frontend import build_edb
from incdl.harness import load_analysis
from incdl.harness.verify import pool_bijection, compare_relations
from incdl.hybrid import dump_partition, partition
from incdl.lang import parse_program, stratify
from incdl.naive import evaluate_program

from conftest import TC, delta, make_state


def _partition(source: str, per_predicate: bool = False):
    program = parse_program(source)
    return partition(None, stratify(program), program, per_predicate=per_predicate)


def test_chain_shape_golden(fixtures):
    text = (fixtures / "chain_shape.idl").read_text()
    assert dump_partition(_partition(text)) == (fixtures / "chain_shape.partition").read_text()


def test_all_recursive_program_has_no_chains():
    part = _partition(TC)
    assert part.chains == []
    assert part.incremental == {"path"}


def test_linear_program_is_one_chain():
    part = _partition(".decl a(id). b(x) :- a(x). c(x) :- b(x).")
    assert [c.members for c in part.chains] == [("b", "c")]
    assert part.chains[0].boundary == "c"


def test_fan_out_ends_a_chain():
    part = _partition(".decl a(id). b(x) :- a(x). c(x) :- b(x). d(x) :- b(x).")
    assert sorted(c.members for c in part.chains) == [("b",), ("c",), ("d",)]


def test_per_predicate_mode_splits_every_chain():
    part = _partition(".decl a(id). b(x) :- a(x). c(x) :- b(x).", per_predicate=True)
    assert [c.members for c in part.chains] == [("b",), ("c",)]


SRC = """
.decl e(id, id).
.decl bad(id).
step(x, y) :- e(x, y), !bad(y).
reach(x, y) :- step(x, y).
reach(x, z) :- reach(x, y), step(y, z).
far(x) :- reach(x, _), !step(x, _).
size(x, n) :- reach(x, _), n = count { reach(x, _) }.
tag(t, x) :- size(x, _), t = new Tag(x).
"""


def test_boundary_matches_batch_evaluation_across_updates():
    program = parse_program(SRC)
    edb = {"e": {(1, 2), (2, 3), (3, 4), (5, 1)}, "bad": {(4,)}}
    hybrid = make_state(SRC, edb, "hybrid")
    full = make_state(SRC, edb, "full")
    steps = [
        delta(deletes={"bad": {(4,)}}),
        delta(inserts={"e": {(4, 5)}}),
        delta(inserts={"bad": {(2,)}}, deletes={"e": {(1, 2)}}),
    ]
    for d in steps:
        d.apply_to(edb)
        hybrid.apply_delta(d)
        full.apply_delta(d)
        expected = evaluate_program(program, edb)
        for rel in ("reach", "far", "size"):
            assert hybrid.relation(rel) == expected[rel]
        bij = pool_bijection(full.pool, hybrid.pool)
        assert compare_relations(full.idb(), hybrid.idb(), bij).ok


def test_unchanged_chain_inputs_propagate_nothing():
    src = ".decl a(id). .decl z(id). b(x) :- a(x). c(x) :- b(x). y(x) :- z(x)."
    state = make_state(src, {"a": {(1,)}, "z": set()}, "hybrid")
    stats = state.apply_delta(delta(inserts={"z": {(3,)}}))
    assert stats.tuples_propagated == 1
    assert state.relation("c") == {(1,)}


def _demo_edb(fixtures):
    return build_edb({"taint_demo.ml": (fixtures / "taint_demo.ml").read_text()})


def test_taint_demo_agrees_and_caches_less(fixtures):
    program = load_analysis("taint")
    edb = _demo_edb(fixtures)
    from incdl.harness import build_state

    states = {}
    for mode in ("full", "hybrid", "per-predicate"):
        state = build_state(program, mode)
        state.initialize(edb)
        states[mode] = state
    full = states["full"]
    assert full.relation("alert")
    for mode in ("hybrid", "per-predicate"):
        other = states[mode]
        assert compare_relations(full.idb(), other.idb(), pool_bijection(full.pool, other.pool)).ok
    assert states["hybrid"].cache_size() <= full.cache_size()
