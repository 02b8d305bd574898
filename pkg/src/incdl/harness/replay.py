"""Commit replay: initialize on snapshot 0, then apply every later snapshot as a delta."""

from __future__ import annotations

import csv
import io
import statistics
import time
from dataclasses import asdict, dataclass, field, fields
from importlib import resources
from pathlib import Path
from typing import Mapping

from ..core import impact
from ..engine import EngineState
from ..freshids import IdPool
from ..frontend import build_edb, diff_edb
from ..hybrid import partition
from ..lang import Program, parse_program, stratify
from ..ra import RaPlan, compile_program
from .synth import CommitSeries
from .verify import VerificationResult, verify

MODES = ("full", "hybrid", "per-predicate")
BUCKETS = (("0", 0, 0), ("1-10", 1, 10), ("11-50", 11, 50), ("51-200", 51, 200),
           ("201-1000", 201, 1000), (">1000", 1001, None))
CSV_COLUMNS = ("commit_index", "changed_lines", "edb_impact", "idb_impact", "idb_change_rate",
               "update_ms", "tuples_propagated", "mode")


class ReplayError(Exception):
    def __init__(self, commit_index: int, message: str):
        super().__init__(f"commit {commit_index}: {message}")
        self.commit_index = commit_index


def taint_analysis_text() -> str:
    return resources.files("incdl.harness").joinpath("analyses/taint.idl").read_text()


def load_analysis(source: str | Path | None = None) -> Program:
    """Parse an analysis file; ``None`` or ``"taint"`` selects the bundled taint analysis."""
    if source is None or str(source) == "taint":
        return parse_program(taint_analysis_text())
    return parse_program(Path(source).read_text())


def build_state(program: Program, mode: str = "full", stats: Mapping[str, int] | None = None,
                pool: IdPool | None = None) -> EngineState:
    if mode not in MODES:
        raise ValueError(f"unknown mode {mode!r}; expected one of {MODES}")
    report = stratify(program)
    plan: RaPlan = compile_program(program, report, stats=stats)
    part = None
    if mode != "full":
        part = partition(plan, report, program, per_predicate=mode == "per-predicate")
    return EngineState(plan, pool, part)


def bucket_of(lines: int) -> str:
    for name, lo, hi in BUCKETS:
        if lines >= lo and (hi is None or lines <= hi):
            return name
    raise ValueError(lines)


@dataclass
class CommitImpact:
    commit_index: int
    changed_lines: int
    edb_impact: int
    idb_impact: int
    idb_change_rate: float
    update_ms: float | None
    tuples_propagated: int
    mode: str


@dataclass
class ImpactReport:
    mode: str
    init_ms: float
    init_idb_size: int
    commits: list[CommitImpact] = field(default_factory=list)
    verification: list[VerificationResult] = field(default_factory=list)

    def to_csv(self) -> str:
        buf = io.StringIO()
        w = csv.writer(buf, lineterminator="\n")
        w.writerow(CSV_COLUMNS)
        for c in self.commits:
            row = asdict(c)
            row["idb_change_rate"] = f"{c.idb_change_rate:.6f}"
            row["update_ms"] = "" if c.update_ms is None else f"{c.update_ms:.3f}"
            w.writerow([row[k] for k in CSV_COLUMNS])
        return buf.getvalue()

    def buckets(self) -> dict[str, list[CommitImpact]]:
        out: dict[str, list[CommitImpact]] = {name: [] for name, _, _ in BUCKETS}
        for c in self.commits:
            out[bucket_of(c.changed_lines)].append(c)
        return out

    def bucket_summary(self) -> str:
        lines = ["bucket,commits,median_change_rate,median_update_ms"]
        for name, rows in self.buckets().items():
            if not rows:
                continue
            rate = statistics.median(c.idb_change_rate for c in rows)
            times = [c.update_ms for c in rows if c.update_ms is not None]
            ms = f"{statistics.median(times):.3f}" if times else ""
            lines.append(f"{name},{len(rows)},{rate:.6f},{ms}")
        return "\n".join(lines) + "\n"


assert tuple(f.name for f in fields(CommitImpact)) == CSV_COLUMNS


def _timed(state: EngineState, delta):
    start = time.perf_counter()
    stats = state.apply_delta(delta)
    return stats, (time.perf_counter() - start) * 1000.0


def replay(series: CommitSeries, program: Program, mode: str = "full", ids: str = "node-path",
           check: bool = False, timing: bool = True, reps: int = 3) -> ImpactReport:
    """Replay ``series`` and measure every commit.

    With ``timing`` each commit is applied, undone and reapplied until it
    has been timed ``reps`` times; the reported time is the median.
    With ``check`` the state is compared with the oracle after every commit
    and the first mismatch aborts the replay.
    """
    if len(series) == 0:
        raise ValueError("empty series")
    try:
        edb = build_edb(series.snapshots[0], ids)
        state = build_state(program, mode, stats={r: len(v) for r, v in edb.items()})
        start = time.perf_counter()
        state.initialize(edb)
        init_ms = (time.perf_counter() - start) * 1000.0
    except Exception as exc:  # noqa: BLE001 - report with the commit index
        raise ReplayError(0, f"{type(exc).__name__}: {exc}") from exc
    old_idb = state.idb()
    report = ImpactReport(mode, init_ms, sum(len(v) for v in old_idb.values()))
    if check:
        report.verification.append(_checked(state, 0))
    for index in range(1, len(series)):
        try:
            new_edb = build_edb(series.snapshots[index], ids)
            delta = diff_edb(edb, new_edb)
            stats, ms = _timed(state, delta)
            times = [ms]
            if timing:
                undo = delta.inverse()
                for _ in range(reps - 1):
                    state.apply_delta(undo)
                    times.append(_timed(state, delta)[1])
            new_idb = state.idb()
        except ReplayError:
            raise
        except Exception as exc:  # noqa: BLE001 - report with the commit index
            raise ReplayError(index, f"{type(exc).__name__}: {exc}") from exc
        size = sum(len(v) for v in old_idb.values())
        idb_impact = impact(old_idb, new_idb)
        report.commits.append(CommitImpact(
            commit_index=index,
            changed_lines=series.changed_lines[index],
            edb_impact=delta.size(),
            idb_impact=idb_impact,
            idb_change_rate=idb_impact / size if size else float(idb_impact > 0),
            update_ms=statistics.median(times) if timing else None,
            tuples_propagated=stats.tuples_propagated,
            mode=mode,
        ))
        if check:
            report.verification.append(_checked(state, index))
        edb, old_idb = new_edb, new_idb
    return report


def _checked(state: EngineState, index: int) -> VerificationResult:
    result = verify(state)
    if not result.ok:
        raise ReplayError(index, f"oracle mismatch: {result.describe()}")
    return result
