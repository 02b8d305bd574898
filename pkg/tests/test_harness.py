from __future__ import annotations

import pytest
from scipy.stats import spearmanr

from incdl.core import impact
from incdl.freshids import IdPool
from incdl.frontend import build_edb, parse_minilang
from incdl.harness import (
    CSV_COLUMNS,
    ReplayError,
    CommitSeries,
    bucket_of,
    build_state,
    differing_subtrees,
    generate_project,
    load_analysis,
    pool_bijection,
    read_series,
    replay,
    synthesize_changes,
    verify,
    write_series,
)
from incdl.harness.cli import main
from incdl.naive import evaluate_program

from conftest import TC, make_state


@pytest.fixture(scope="module")
def small_project():
    return generate_project(n_functions=60, seed=4, functions_per_file=10)


@pytest.fixture(scope="module")
def taint():
    return load_analysis("taint")


def _lines(project):
    return sum(text.count("\n") for text in project.values())


def test_generated_project_is_deterministic():
    assert generate_project(40, seed=1) == generate_project(40, seed=1)
    assert generate_project(40, seed=1) != generate_project(40, seed=2)


def test_synthesis_is_deterministic(small_project):
    a = synthesize_changes(small_project, "commit", 5, seed=9)
    b = synthesize_changes(small_project, "commit", 5, seed=9)
    assert a.snapshots == b.snapshots
    assert a.changed_lines == b.changed_lines
    assert len(a) == 6


def test_ide_edit_changes_one_subtree(small_project):
    series = synthesize_changes(small_project, "ide", 20, seed=3)
    for old, new in zip(series.snapshots, series.snapshots[1:]):
        diffs = []
        for path in sorted(set(old) | set(new)):
            if old.get(path) != new.get(path):
                diffs += differing_subtrees(parse_minilang(old[path], path), parse_minilang(new[path], path))
        assert len(diffs) <= 1


def test_commit_sizes_span_buckets():
    project = generate_project(n_functions=60, seed=0, functions_per_file=10)
    series = synthesize_changes(project, "commit", 100, seed=0)
    assert len({bucket_of(n) for n in series.changed_lines[1:]}) >= 3


def test_series_round_trip(tmp_path, small_project):
    series = synthesize_changes(small_project, "commit", 3, seed=1)
    write_series(series, tmp_path / "s")
    again = read_series(tmp_path / "s")
    assert again.snapshots == series.snapshots
    assert again.changed_lines == series.changed_lines


def test_unchanged_commit_has_no_impact(small_project, taint):
    report = replay(CommitSeries([small_project, dict(small_project)]), taint, timing=False)
    (row,) = report.commits
    assert (row.changed_lines, row.edb_impact, row.idb_impact, row.tuples_propagated) == (0, 0, 0, 0)


@pytest.mark.parametrize("mode", ["full", "hybrid", "per-predicate"])
def test_idb_impact_matches_recomputation(small_project, taint, mode):
    series = synthesize_changes(small_project, "commit", 6, seed=5)
    report = replay(series, taint, mode, check=True, timing=False)
    assert len(report.verification) == len(series)
    pool = IdPool()
    idbs = [evaluate_program(taint, build_edb(s), pool) for s in series.snapshots]
    for row, old, new in zip(report.commits, idbs, idbs[1:]):
        assert row.idb_impact == impact(old, new)


def test_csv_is_reproducible(small_project, taint):
    series = synthesize_changes(small_project, "commit", 4, seed=2)
    a = replay(series, taint, timing=False).to_csv()
    b = replay(series, taint, timing=False).to_csv()
    assert a == b
    header, *rows = a.splitlines()
    assert header.split(",") == list(CSV_COLUMNS)
    assert len(rows) == 4


def test_change_rate_tracks_commit_size(taint):
    project = generate_project(n_functions=50, seed=7, functions_per_file=10)
    assert 400 <= _lines(project) <= 700
    series = synthesize_changes(project, "commit", 20, seed=7)
    report = replay(series, taint, timing=False)
    rho = spearmanr([c.changed_lines for c in report.commits], [c.idb_change_rate for c in report.commits])[0]
    assert rho > 0.5


def test_replay_reports_failing_commit(small_project, taint):
    broken = dict(small_project)
    broken[sorted(broken)[0]] = "fn ( {"
    with pytest.raises(ReplayError) as info:
        replay(CommitSeries([small_project, broken]), taint, timing=False)
    assert info.value.commit_index == 1


def test_verify_on_fresh_state_uses_identity_bijection():
    state = make_state(TC + "n(v) :- edge(x, _), v = new N(x).", {"edge": {(1, 2), (2, 3)}})
    assert pool_bijection(state.pool, state.pool) == {v: v for _, v in state.pool}
    result = verify(state)
    assert result.ok
    assert len(result.bijection) == 2


def test_verify_detects_corrupted_cache():
    state = make_state(TC, {"edge": {(1, 2), (2, 3)}})
    state.db["path"].discard((1, 3))
    result = verify(state)
    assert not result.ok
    assert (result.relation, result.row, result.problem) == ("path", (1, 3), "missing")


def test_cli_smoke(tmp_path, capsys):
    project = tmp_path / "proj"
    assert main(["gen-project", str(project), "--functions", "30", "--per-file", "10"]) == 0
    assert main(["init", str(project), "taint", "--mode", "hybrid"]) == 0
    assert "idb tuples" in capsys.readouterr().out
    series = tmp_path / "series"
    assert main(["synth", str(project), "--kind", "commit", "-n", "3", "--seed", "1", "--out", str(series)]) == 0
    out = tmp_path / "report.csv"
    assert main(["replay", str(series), "taint", "--out", str(out), "--verify", "--no-timing"]) == 0
    first = out.read_text()
    assert first.splitlines()[0] == ",".join(CSV_COLUMNS)
    assert main(["replay", str(series), "taint", "--out", str(out), "--no-timing"]) == 0
    assert out.read_text() == first
    assert main(["dump-partition", "taint"]) == 0
    assert "incremental:" in capsys.readouterr().out
    assert main(["dump-plan", "taint", "--fold"]) == 0
    assert capsys.readouterr().out


def test_cli_synthesizes_from_a_baseline(tmp_path):
    project = generate_project(n_functions=20, seed=3, functions_per_file=10)
    series = tmp_path / "series"
    write_series(CommitSeries([project]), series)
    out = tmp_path / "r.csv"
    assert main(["replay", str(series), "taint", "--out", str(out), "--commits", "3", "--seed", "4",
                 "--no-timing"]) == 0
    assert len(out.read_text().splitlines()) == 4
