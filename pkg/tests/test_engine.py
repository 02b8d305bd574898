from __future__ import annotations

import random

import pytest

from incdl.core import DeltaError, SchemaError
from incdl.lang import parse_program
from incdl.naive import evaluate_program

from conftest import TC, delta, make_state


def test_tc_initialize():
    state = make_state(TC, {"edge": {(1, 2), (2, 3)}})
    assert state.relation("path") == {(1, 2), (2, 3), (1, 3)}


def test_empty_edb():
    state = make_state(TC + "np(x) :- edge(x, _), !path(x, x).", {"edge": set()})
    assert all(rows == set() for rows in state.idb().values())


def test_delete_edge_removes_dependents():
    state = make_state(TC, {"edge": {(1, 2), (2, 3)}})
    stats = state.apply_delta(delta(deletes={"edge": {(2, 3)}}))
    assert state.relation("path") == {(1, 2)}
    assert stats.sink_changes == 2
    assert stats.tuples_propagated == 2


def test_insert_edge_extends_closure():
    state = make_state(TC, {"edge": {(1, 2), (2, 3)}})
    before = set(state.relation("path"))
    state.apply_delta(delta(inserts={"edge": {(3, 4)}}))
    assert state.relation("path") - before == {(3, 4), (2, 4), (1, 4)}


def test_empty_delta_is_a_no_op():
    state = make_state(TC, {"edge": {(1, 2), (2, 3)}})
    size = state.cache_size()
    stats = state.apply_delta(delta())
    assert stats.tuples_propagated == 0
    assert state.cache_size() == size


def test_closing_edge_on_chain_emits_exactly_new_pairs():
    n = 10
    edges = {(i, i + 1) for i in range(n)}
    state = make_state(TC, {"edge": edges})
    before = set(state.relation("path"))
    stats = state.apply_delta(delta(inserts={"edge": {(n, 0)}}))
    after = state.relation("path")
    assert after == evaluate_program(parse_program(TC), {"edge": edges | {(n, 0)}})["path"]
    assert stats.tuples_propagated == len(after - before)


def test_unrelated_insert_touches_nothing():
    state = make_state(TC + ".decl other(id).", {"edge": {(1, 2)}, "other": set()})
    stats = state.apply_delta(delta(inserts={"other": {(5,)}}))
    assert stats.tuples_propagated == 0
    assert stats.iterations == 0


def test_cycle_creation():
    state = make_state(TC, {"edge": {(1, 2), (2, 3)}})
    state.apply_delta(delta(inserts={"edge": {(3, 1)}}))
    assert state.relation("path") == {(a, b) for a in (1, 2, 3) for b in (1, 2, 3)}


def test_diamond_deletion_keeps_alternative_path():
    state = make_state(TC, {"edge": {(1, 2), (2, 4), (1, 3), (3, 4)}})
    stats = state.apply_delta(delta(deletes={"edge": {(2, 4)}}))
    assert state.relation("path") == {(1, 2), (1, 3), (3, 4), (1, 4)}
    assert (1, 4) in state.relation("path")
    assert (2, 4) not in state.relation("path")
    assert stats.sink_changes == 1


def test_unique_derivation_deletion_has_no_successful_rederivation():
    state = make_state(TC, {"edge": {(1, 2), (2, 3), (3, 4)}})
    stats = state.apply_delta(delta(deletes={"edge": {(1, 2)}}))
    assert state.relation("path") == {(2, 3), (3, 4), (2, 4)}
    assert stats.sink_changes == 3


def test_delta_rejects_insert_and_delete_of_same_tuple():
    with pytest.raises(DeltaError):
        delta(inserts={"edge": {(1, 2)}}, deletes={"edge": {(1, 2)}})


def test_delete_of_absent_tuple_is_rejected():
    state = make_state(TC, {"edge": {(1, 2)}})
    with pytest.raises(DeltaError):
        state.apply_delta(delta(deletes={"edge": {(7, 8)}}))


def test_idb_relations_cannot_be_updated():
    state = make_state(TC, {"edge": {(1, 2)}})
    with pytest.raises(SchemaError):
        state.apply_delta(delta(inserts={"path": {(1, 1)}}))


def test_bad_row_type_is_rejected():
    state = make_state(TC, {"edge": {(1, 2)}})
    with pytest.raises(SchemaError):
        state.apply_delta(delta(inserts={"edge": {("a", 2)}}))


def test_projection_counts_support():
    src = ".decl e(id, string). p(x) :- e(x, _)."
    state = make_state(src, {"e": {(1, "a"), (1, "b")}})
    assert state.relation("p") == {(1,)}
    stats = state.apply_delta(delta(deletes={"e": {(1, "a")}}))
    assert stats.sink_changes == 0
    assert state.relation("p") == {(1,)}
    stats = state.apply_delta(delta(deletes={"e": {(1, "b")}}))
    assert stats.sink_changes == 1
    assert state.relation("p") == set()


def test_random_counting_against_recompute():
    src = ".decl e(id, id). .decl f(id, id). p(x) :- e(x, _). p(y) :- f(_, y). q(x, z) :- e(x, y), f(y, z)."
    program = parse_program(src)
    rng = random.Random(3)
    edb = {r: {(rng.randrange(10), rng.randrange(10)) for _ in range(50)} for r in ("e", "f")}
    state = make_state(src, edb)
    for _ in range(20):
        rel = rng.choice(("e", "f"))
        row = (rng.randrange(10), rng.randrange(10))
        d = delta(deletes={rel: {row}}) if row in edb[rel] else delta(inserts={rel: {row}})
        d.apply_to(edb)
        state.apply_delta(d)
        assert state.idb() == evaluate_program(program, edb)


def test_aggregates_follow_updates():
    src = """
    .decl e(id, int).
    .decl s(id, string).
    c(x, k) :- e(x, _), k = count { e(x, _) }.
    t(x, k) :- e(x, _), k = sum v { e(x, v) }.
    lo(x, k) :- e(x, _), k = min v { e(x, v) }.
    txt(x, k) :- s(x, _), k = concat v { s(x, v) }.
    """
    edb = {"e": {(1, 3), (1, 5), (2, 7)}, "s": {(1, "b"), (1, "a")}}
    state = make_state(src, edb)
    assert state.relation("c") == {(1, 2), (2, 1)}
    assert state.relation("t") == {(1, 8), (2, 7)}
    assert state.relation("txt") == {(1, "ab")}
    state.apply_delta(delta(inserts={"e": {(1, 1)}}, deletes={"e": {(2, 7)}, "s": {(1, "a")}}))
    assert state.relation("c") == {(1, 3)}
    assert state.relation("lo") == {(1, 1)}
    assert state.relation("txt") == {(1, "b")}


def test_fresh_ids_are_stable_across_updates():
    src = ".decl e(id, id). n(v, x) :- e(x, y), v = new Node(x, y)."
    state = make_state(src, {"e": {(1, 2)}})
    (first,) = state.relation("n")
    state.apply_delta(delta(deletes={"e": {(1, 2)}}))
    state.apply_delta(delta(inserts={"e": {(1, 2)}}))
    assert state.relation("n") == {first}


def test_builtin_runs_once_per_transaction():
    src = """
    .decl e(id, id, int).
    .decl f(id, id, int).
    w(x, y, d) :- e(x, y, d).
    w(x, y, d) :- f(x, y, d).
    sp(a, b, d) :- @shortest_path[w](a, b, d).
    """
    state = make_state(src, {"e": {(1, 2, 1)}, "f": {(2, 3, 1)}})
    (node,) = state.builtin_nodes()
    assert node.evaluate_calls == 1
    stats = state.apply_delta(delta(inserts={"e": {(1, 3, 5)}, "f": {(3, 4, 1)}}))
    assert stats.builtin_calls == 1
    # a change that cancels before reaching the built-in costs nothing
    stats = state.apply_delta(delta(inserts={"f": {(1, 2, 1)}}, deletes={"e": {(1, 2, 1)}}))
    assert stats.builtin_calls == 0
    assert node.evaluate_calls == 2


def test_shortest_path_update_is_a_diff():
    src = ".decl e(id, id, int). sp(a, b, d) :- @shortest_path[e](a, b, d)."
    state = make_state(src, {"e": {(1, 2, 5), (2, 3, 1), (3, 4, 1)}})
    before = set(state.relation("sp"))
    state.apply_delta(delta(inserts={"e": {(1, 3, 1)}}))
    after = state.relation("sp")
    assert before - after == {(1, 3, 6), (1, 4, 7)}
    assert after - before == {(1, 3, 1), (1, 4, 2)}


def test_mutual_recursion_with_lower_negation():
    src = TC + """
    a(x) :- edge(x, _), !path(x, x).
    b(y) :- a(x), edge(x, y).
    a(y) :- b(y), edge(y, _).
    """
    program = parse_program(src)
    edb = {"edge": {(1, 2), (2, 3), (3, 1), (4, 5), (5, 6)}}
    state = make_state(src, edb)
    assert state.idb() == evaluate_program(program, edb)
    for d in (delta(deletes={"edge": {(3, 1)}}), delta(inserts={"edge": {(6, 4)}}), delta(deletes={"edge": {(1, 2)}})):
        d.apply_to(edb)
        state.apply_delta(d)
        assert state.idb() == evaluate_program(program, edb)
