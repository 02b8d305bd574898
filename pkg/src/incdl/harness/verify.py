"""Compare an incremental state against the from-scratch oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Mapping

from ..core import Relations
from ..freshids import IdPool, is_fresh
from ..lang import Program
from ..naive import evaluate_program


@dataclass
class VerificationResult:
    ok: bool
    # oracle fresh id -> incremental fresh id
    bijection: dict[int, int] = field(default_factory=dict)
    relation: str | None = None
    row: tuple | None = None
    # "missing": oracle has the row, the state does not; "unexpected": the reverse
    problem: str | None = None

    def __bool__(self) -> bool:
        return self.ok

    def describe(self) -> str:
        if self.ok:
            return f"verified ({len(self.bijection)} fresh ids matched)"
        return f"{self.problem} tuple {self.relation}{self.row}"


def pool_bijection(oracle: IdPool, state: IdPool) -> dict[int, int]:
    """Match fresh ids whose constructor keys agree once inner fresh ids are matched.

    Keys are visited in numbering order, so a fresh id used as a
    constructor argument is always matched before the key that uses it.
    """
    if oracle is state:
        return {v: v for _, v in oracle}
    out: dict[int, int] = {}
    for (ctor, args), value in sorted(oracle, key=lambda kv: kv[1]):
        mapped = []
        for a in args:
            if isinstance(a, int) and is_fresh(a):
                if a not in out:
                    break
                mapped.append(out[a])
            else:
                mapped.append(a)
        else:
            found = state.lookup(ctor, tuple(mapped))
            if found is not None:
                out[value] = found
    return out


def _translate(row: tuple, bijection: Mapping[int, int]) -> tuple | None:
    out = []
    for v in row:
        if isinstance(v, int) and not isinstance(v, bool) and is_fresh(v):
            if v not in bijection:
                return None
            out.append(bijection[v])
        else:
            out.append(v)
    return tuple(out)


def compare_relations(expected: Mapping[str, set], actual: Mapping[str, set],
                      bijection: Mapping[int, int], relations=None) -> VerificationResult:
    """Check ``actual`` equals ``expected`` with fresh ids renamed by ``bijection``.

    The bijection is injective by construction, so equal sizes plus
    inclusion give equality.
    """
    for rel in sorted(relations if relations is not None else set(expected) | set(actual)):
        want = expected.get(rel, set())
        have = actual.get(rel, set())
        translated = set()
        for row in sorted(want):
            t = _translate(row, bijection)
            if t is None or t not in have:
                return VerificationResult(False, dict(bijection), rel, row, "missing")
            translated.add(t)
        extra = have - translated
        if extra:
            return VerificationResult(False, dict(bijection), rel, min(extra), "unexpected")
    return VerificationResult(True, dict(bijection))


def verify(state, edb: Mapping[str, set] | None = None, program: Program | None = None,
           relations=None) -> VerificationResult:
    """Recompute the IDB from scratch and compare it with ``state``.

    ``state`` is an engine state; the EDB defaults to the state's own and
    the program to the one the state was compiled from.
    """
    program = program if program is not None else state.plan.program
    edb = edb if edb is not None else state.edb()
    oracle_pool = IdPool()
    expected: Relations = evaluate_program(program, edb, oracle_pool)
    bijection = pool_bijection(oracle_pool, state.pool)
    return compare_relations(expected, state.idb(), bijection, relations)
