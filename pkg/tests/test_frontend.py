from __future__ import annotations

import random

import pytest

from incdl.frontend import (
    KeyCollision,
    MiniLangSyntaxError,
    SchemaMismatch,
    TrapImportError,
    build_edb,
    diff_edb,
    extract_sources,
    extract_trap,
    format_minilang,
    format_trap,
    import_traps,
    key_id,
    parse_minilang,
    parse_trap,
)
from incdl.frontend import importer
from incdl.harness.projectgen import generate_project


def _kinds(node, kind):
    return [n for _, n in node.walk() if n.kind == kind]


def test_parse_small_function():
    ast = parse_minilang("fn f(x){ return x; }", "a.ml")
    assert len(_kinds(ast, "fn")) == 1
    assert len(_kinds(ast, "param")) == 1
    assert len(_kinds(ast, "return")) == 1


def test_parse_empty_file():
    ast = parse_minilang("", "a.ml")
    assert ast.kind == "file"
    assert ast.children == []


def test_unbalanced_brace_reports_location():
    with pytest.raises(MiniLangSyntaxError) as info:
        parse_minilang("fn f() {\n  return 1;\n", "bad.ml")
    assert info.value.filename == "bad.ml"
    assert info.value.lineno >= 2


def test_print_round_trip(fixtures):
    text = (fixtures / "taint_demo.ml").read_text()
    ast = parse_minilang(text, "demo.ml")
    again = parse_minilang(format_minilang(ast), "demo.ml")
    assert format_minilang(again) == format_minilang(ast)
    assert [n.kind for _, n in again.walk()] == [n.kind for _, n in ast.walk()]


def test_trap_golden(fixtures):
    text = (fixtures / "taint_demo.ml").read_text()
    trap = extract_trap(parse_minilang(text, "taint_demo.ml"))
    expected = (fixtures / "taint_demo.trap").read_text()
    assert format_trap(trap) == expected
    assert expected.rstrip("\n").endswith("bump_id_counter")
    assert '#1 = @"taint_demo.ml#r_1"' in expected


def test_trap_text_round_trip(fixtures):
    text = (fixtures / "taint_demo.trap").read_text()
    assert format_trap(parse_trap(text, "taint_demo.ml")) == text


def test_first_function_key():
    trap = extract_trap(parse_minilang("fn f() { return 1; }", "main.ml"))
    keys = [d.key for d in trap.directives if hasattr(d, "key")]
    assert keys[:2] == ["main.ml#r", "main.ml#r_1"]
    # keys extend their parent's key by one index
    assert all(k.rsplit("_", 1)[0] in keys for k in keys[1:])


def test_identical_functions_in_two_files_get_distinct_ids():
    src = "fn f() { return 1; }"
    edb = build_edb({"a.ml": src, "b.ml": src})
    assert len(edb["func_def"]) == 2


def test_import_is_deterministic(fixtures):
    sources = {"taint_demo.ml": (fixtures / "taint_demo.ml").read_text()}
    assert build_edb(sources) == build_edb(sources)
    one = format_trap(extract_sources(sources)[0])
    assert one == format_trap(extract_sources(sources)[0])


def test_node_path_ids_have_top_bit_clear(fixtures):
    edb = build_edb({"taint_demo.ml": (fixtures / "taint_demo.ml").read_text()})
    ids = {row[0] for row in edb["parent"]}
    assert all(0 <= i < 1 << 63 for i in ids)


def test_bump_counter_starts_each_file_at_next_million():
    sources = {"a.ml": "fn f() { return 1; }", "b.ml": "fn g() { return 2; }"}
    edb = build_edb(sources, "bump-counter")
    (a_file,) = [r[0] for r in edb["file"] if r[1] == "a.ml"]
    (b_file,) = [r[0] for r in edb["file"] if r[1] == "b.ml"]
    assert a_file < 1_000_000
    assert b_file == 1_000_000


def test_hash_collision_is_reported(monkeypatch):
    monkeypatch.setattr(importer, "key_id", lambda key: 42)
    with pytest.raises(KeyCollision) as info:
        build_edb({"a.ml": "fn f() { return 1; }"})
    assert info.value.id == 42


def test_dangling_label_is_rejected():
    trap = parse_trap('#0 = @"x.ml#r"\nfile(#0, \'x.ml\')\nblock(#9)\n', "x.ml")
    with pytest.raises(TrapImportError):
        import_traps([trap])


def _touched_ids(edb, delta):
    rows = [r for rels in (delta.inserts, delta.deletes) for rs in rels.values() for r in rs]
    return {v for r in rows for v in r if isinstance(v, int) and v > 1 << 20}


@pytest.mark.parametrize("mode", ["node-path", "bump-counter"])
def test_editing_one_file_leaves_other_ids_alone(mode):
    project = generate_project(n_functions=60, seed=2, functions_per_file=10)
    paths = sorted(project)
    edited = dict(project)
    target = paths[len(paths) // 2]
    edited[target] = project[target].replace("return", "x = 1;\n    return", 1)
    old, new = build_edb(project, mode), build_edb(edited, mode)
    d = diff_edb(old, new)
    assert d.size() > 0
    owner = {}
    for row in old["node_func"] | old["parent"]:
        owner[row[0]] = None
    files = {r[1]: r[0] for r in old["file"]}
    # map every node id to the file it belongs to through the parent relation
    parent = {r[0]: r[1] for r in old["parent"] | new["parent"]}
    file_ids = set(files.values())

    def file_of(node):
        while node not in file_ids:
            node = parent[node]
        return node

    changed = set()
    for rels in (d.inserts, d.deletes):
        for rel, rows in rels.items():
            for row in rows:
                if rel in ("file",):
                    changed.add(row[0])
                else:
                    changed.add(file_of(row[0]))
    if mode == "node-path":
        assert changed == {files[target]}
    else:
        # ids before the edited file are untouched
        untouched = {files[p] for p in paths if p < target}
        assert not (changed & untouched)
        for p in paths:
            if p < target:
                assert (files[p], p) in new["file"]


def test_shifting_a_node_changes_downstream_sibling_ids():
    before = build_edb({"a.ml": "fn f() { return 1; }\nfn g() { return 2; }"})
    after = build_edb({"a.ml": "fn h() { return 0; }\nfn f() { return 1; }\nfn g() { return 2; }"})
    assert {r[0] for r in before["func_def"]} != {r[0] for r in after["func_def"] if r[1] != "h"}


def test_diff_edb_properties():
    rng = random.Random(1)
    schema = {"r": 2, "s": 1}
    for _ in range(50):
        old = {rel: {tuple(rng.randrange(5) for _ in range(k)) for _ in range(rng.randrange(10))} for rel, k in schema.items()}
        new = {rel: {tuple(rng.randrange(5) for _ in range(k)) for _ in range(rng.randrange(10))} for rel, k in schema.items()}
        d = diff_edb(old, new)
        patched = {rel: set(rows) for rel, rows in old.items()}
        d.apply_to(patched)
        assert patched == new
        assert d.size() == sum(len(old[r] ^ new[r]) for r in schema)
    assert diff_edb(old, old).size() == 0
    with pytest.raises(SchemaMismatch):
        diff_edb({"r": set()}, {"s": set()})
    with pytest.raises(SchemaMismatch):
        diff_edb({"r": {(1,)}}, {"r": {(1, 2)}})


def test_key_id_is_stable():
    assert key_id("main.ml#r_1") == key_id("main.ml#r_1")
    assert key_id("main.ml#r_1") != key_id("main.ml#r_2")
