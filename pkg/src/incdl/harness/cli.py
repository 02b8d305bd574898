"""The ``incdl`` command line."""

from __future__ import annotations

import argparse
import sys
import time
from pathlib import Path

from ..frontend import build_edb
from ..frontend.importer import MODES as ID_MODES
from ..freshids import dump_pool
from ..hybrid import dump_partition, partition
from ..lang import stratify
from ..ra import compile_program, constant_fold, dump_plan
from .projectgen import generate_project, read_project, write_project
from .replay import MODES, ReplayError, build_state, load_analysis, replay
from .synth import read_series, synthesize_changes, write_series


def _project(path: str) -> dict[str, str]:
    project = read_project(path)
    if not project:
        raise SystemExit(f"incdl: no .ml files under {path}")
    return project


def cmd_init(args) -> int:
    program = load_analysis(args.analysis)
    start = time.perf_counter()
    edb = build_edb(_project(args.project), args.ids)
    extract_s = time.perf_counter() - start
    state = build_state(program, args.mode, stats={r: len(v) for r, v in edb.items()})
    stats = state.initialize(edb)
    idb = state.idb()
    print(f"edb tuples: {sum(len(v) for v in edb.values())} (extracted in {extract_s:.2f}s)")
    print(f"idb tuples: {sum(len(v) for v in idb.values())}")
    print(f"cached tuples: {state.cache_size()}")
    print(f"init: {stats.wall_time:.2f}s mode={args.mode} ids={args.ids}")
    for pred in sorted(idb):
        print(f"  {pred}: {len(idb[pred])}")
    if args.snapshot:
        Path(args.snapshot).write_text(state.snapshot())
    if args.pool:
        Path(args.pool).write_bytes(dump_pool(state.pool))
    return 0


def cmd_replay(args) -> int:
    program = load_analysis(args.analysis)
    series = read_series(args.series_dir)
    if len(series) == 1 and args.commits:
        series = synthesize_changes(series.snapshots[0], args.kind, args.commits, args.seed)
    try:
        report = replay(series, program, args.mode, args.ids, check=args.verify,
                        timing=not args.no_timing, reps=args.reps)
    except ReplayError as exc:
        print(f"incdl: replay failed at {exc}", file=sys.stderr)
        return 1
    text = report.to_csv()
    if args.out:
        Path(args.out).write_text(text)
    else:
        sys.stdout.write(text)
    if args.buckets:
        Path(args.buckets).write_text(report.bucket_summary())
    if args.verify:
        print(f"verified {len(report.verification)} states against the oracle", file=sys.stderr)
    return 0


def cmd_synth(args) -> int:
    series = synthesize_changes(_project(args.project), args.kind, args.n, args.seed)
    out = Path(args.out or f"{args.project.rstrip('/')}-{args.kind}-series")
    write_series(series, out)
    print(f"wrote {len(series)} snapshots to {out}")
    return 0


def cmd_gen(args) -> int:
    project = generate_project(args.functions, args.seed, args.per_file)
    write_project(project, args.out)
    print(f"wrote {len(project)} files to {args.out}")
    return 0


def cmd_dump_plan(args) -> int:
    program = load_analysis(args.analysis)
    report = stratify(program)
    stats = None
    if args.project:
        stats = {r: len(v) for r, v in build_edb(_project(args.project)).items()}
    plan = compile_program(program, report, stats=stats)
    if args.fold:
        plan = constant_fold(plan)
    sys.stdout.write(dump_plan(plan))
    return 0


def cmd_dump_partition(args) -> int:
    program = load_analysis(args.analysis)
    report = stratify(program)
    plan = compile_program(program, report)
    sys.stdout.write(dump_partition(partition(plan, report, program, per_predicate=args.per_predicate)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="incdl", description="Incremental Datalog analysis over MiniLang projects.")
    sub = parser.add_subparsers(dest="command", required=True)

    def engine_flags(p):
        p.add_argument("--mode", choices=MODES, default="full")
        p.add_argument("--ids", choices=ID_MODES, default="node-path")

    p = sub.add_parser("init", help="extract a project and initialize the analysis")
    p.add_argument("project")
    p.add_argument("analysis", help="IncDL file, or 'taint' for the bundled analysis")
    engine_flags(p)
    p.add_argument("--snapshot", help="write the IDB snapshot here")
    p.add_argument("--pool", help="write the fresh-id pool here")
    p.set_defaults(func=cmd_init)

    p = sub.add_parser("replay", help="replay a directory of snapshots and write the impact CSV")
    p.add_argument("series_dir")
    p.add_argument("analysis")
    p.add_argument("--out", help="CSV path (default: stdout)")
    p.add_argument("--verify", action="store_true", help="check against the oracle after every commit")
    p.add_argument("--seed", type=int, default=0, help="seed for --commits")
    p.add_argument("--commits", type=int, default=0,
                   help="when the series holds only a baseline, synthesize this many commits from it")
    p.add_argument("--kind", choices=("ide", "commit"), default="commit")
    p.add_argument("--no-timing", action="store_true", help="leave update_ms empty for reproducible output")
    p.add_argument("--reps", type=int, default=3)
    p.add_argument("--buckets", help="write the per-bucket summary CSV here")
    engine_flags(p)
    p.set_defaults(func=cmd_replay)

    p = sub.add_parser("synth", help="synthesize a change series from a project")
    p.add_argument("project")
    p.add_argument("--kind", choices=("ide", "commit"), required=True)
    p.add_argument("-n", type=int, required=True)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", help="series directory (default: <project>-<kind>-series)")
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("gen-project", help="generate a random MiniLang project")
    p.add_argument("out")
    p.add_argument("--functions", type=int, default=2000)
    p.add_argument("--per-file", type=int, default=25)
    p.add_argument("--seed", type=int, default=0)
    p.set_defaults(func=cmd_gen)

    p = sub.add_parser("dump-plan", help="print the compiled plan")
    p.add_argument("analysis")
    p.add_argument("--fold", action="store_true", help="constant-fold first")
    p.add_argument("--project", help="use this project's relation sizes for join ordering")
    p.set_defaults(func=cmd_dump_plan)

    p = sub.add_parser("dump-partition", help="print the hybrid partition")
    p.add_argument("analysis")
    p.add_argument("--per-predicate", action="store_true")
    p.set_defaults(func=cmd_dump_partition)
    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    return args.func(args)


if __name__ == "__main__":
    raise SystemExit(main())
