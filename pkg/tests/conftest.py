from __future__ import annotations

from pathlib import Path

import pytest

from incdl.core import Delta
from incdl.engine import EngineState
from incdl.freshids import IdPool
from incdl.hybrid import partition
from incdl.lang import parse_program, stratify
from incdl.ra import compile_program

FIXTURES = Path(__file__).parent / "fixtures"

TC = """
.decl edge(id, id).
path(x, y) :- edge(x, y).
path(x, z) :- path(x, y), edge(y, z).
"""


def make_state(source: str, edb: dict, mode: str = "full", pool: IdPool | None = None) -> EngineState:
    program = parse_program(source)
    report = stratify(program)
    plan = compile_program(program, report)
    part = None if mode == "full" else partition(plan, report, program, per_predicate=mode == "per-predicate")
    state = EngineState(plan, pool, part)
    state.initialize(edb)
    return state


def delta(inserts=None, deletes=None) -> Delta:
    return Delta.of(inserts=inserts or {}, deletes=deletes or {})


@pytest.fixture
def fixtures() -> Path:
    return FIXTURES


ACCEPTANCE: list[str] = []


def record(criterion: str, ok: bool, detail: str) -> None:
    """Print and remember one acceptance verdict; the summary repeats them at the end."""
    line = f"{'PASS' if ok else 'FAIL'} {criterion}: {detail}"
    print(line)
    ACCEPTANCE.append(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE:
            terminalreporter.write_line(line)
