"""Commit replay, oracle verification and benchmark reporting."""

from .projectgen import generate_project, read_project, write_project
from .replay import (
    BUCKETS,
    CSV_COLUMNS,
    MODES,
    CommitImpact,
    ImpactReport,
    ReplayError,
    bucket_of,
    build_state,
    load_analysis,
    replay,
    taint_analysis_text,
)
from .synth import CommitSeries, changed_lines, differing_subtrees, read_series, synthesize_changes, write_series
from .verify import VerificationResult, compare_relations, pool_bijection, verify

__all__ = [
    "BUCKETS", "CSV_COLUMNS", "MODES", "CommitImpact", "CommitSeries", "ImpactReport", "ReplayError",
    "VerificationResult", "bucket_of", "build_state", "changed_lines", "compare_relations",
    "differing_subtrees", "generate_project", "load_analysis", "pool_bijection", "read_project",
    "read_series", "replay", "synthesize_changes", "taint_analysis_text", "verify", "write_project",
    "write_series",
]
