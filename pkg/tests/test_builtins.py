from __future__ import annotations

import pytest

from incdl.builtins import (
    REGISTRY,
    BuiltinNode,
    MultipleEntries,
    NegativeWeight,
    builtin_dominators,
    builtin_shortest_path,
    builtin_string_concat_agg,
    wrap_builtin,
)


def test_dominators_of_if_diamond():
    e, a, b, j = 1, 2, 3, 4
    idom = dict(builtin_dominators({(e, a), (e, b), (a, j), (b, j)}, {(e,)}))
    assert idom == {a: e, b: e, j: e}


def test_dominators_need_one_entry():
    assert builtin_dominators({(1, 2)}, set()) == set()
    with pytest.raises(MultipleEntries):
        builtin_dominators({(1, 2)}, {(1,), (2,)})


def test_shortest_path_triangle():
    dist = {(a, b): d for a, b, d in builtin_shortest_path({(1, 2, 1), (2, 3, 1), (1, 3, 3)})}
    assert dist[(1, 3)] == 2


def test_shortest_path_rejects_negative_weights():
    with pytest.raises(NegativeWeight):
        builtin_shortest_path({(1, 2, -1)})


def test_concat_orders_by_value():
    assert builtin_string_concat_agg({("g", "b"), ("g", "a")}) == {("g", "ab")}


def test_node_evaluates_once_on_activation_and_caches():
    node = wrap_builtin(REGISTRY["shortest_path"])(0, [10])
    assert node.process({}) == {}
    assert node.evaluate_calls == 1
    assert node.process({}) == {}
    assert node.evaluate_calls == 1


def test_node_batches_all_input_changes():
    node = BuiltinNode(0, REGISTRY["shortest_path"], [10])
    node.process({})
    out = node.process({0: {(1, 2, 4): 1, (2, 3, 1): 1}})
    assert node.evaluate_calls == 2
    assert out == {(1, 2, 4): 1, (2, 3, 1): 1, (1, 3, 5): 1}
    out = node.process({0: {(1, 3, 1): 1}})
    assert out == {(1, 3, 5): -1, (1, 3, 1): 1}


def test_wrong_input_count():
    with pytest.raises(Exception):
        wrap_builtin(REGISTRY["dominators"])(0, [1])
