"""Trap import: resolve labels to 64-bit ids and build the EDB."""

from __future__ import annotations

from typing import Iterable, Mapping

from ..core import Delta, Relations, diff_relations
from .minilang import parse_minilang
from .trap import SCHEMA, BumpIdCounter, Label, LabelDef, TrapFile, TupleInsert, extract_trap

FNV_OFFSET = 0xCBF29CE484222325
FNV_PRIME = 0x100000001B3
MASK64 = (1 << 64) - 1
HASH_MASK = (1 << 63) - 1  # top bit reserved for fresh ids
BUMP = 1_000_000
MODES = ("node-path", "bump-counter")


class KeyCollision(Exception):
    def __init__(self, key_a: str, key_b: str, value: int):
        super().__init__(f"keys {key_a!r} and {key_b!r} both map to id {value}")
        self.key_a = key_a
        self.key_b = key_b
        self.id = value


class TrapImportError(ImportError):
    pass


class SchemaMismatch(Exception):
    pass


def fnv1a_64(text: str) -> int:
    h = FNV_OFFSET
    for byte in text.encode("utf-8"):
        h ^= byte
        h = (h * FNV_PRIME) & MASK64
    return h


def key_id(key: str) -> int:
    return fnv1a_64(key) & HASH_MASK


class _IdAssigner:
    def __init__(self, mode: str):
        if mode not in MODES:
            raise ValueError(f"unknown id mode {mode!r}")
        self.mode = mode
        self.counter = 1
        self.by_key: dict[str, int] = {}
        self.owner: dict[int, str] = {}

    def _claim(self, value: int, key: str) -> int:
        other = self.owner.get(value)
        if other is not None and other != key:
            raise KeyCollision(other, key, value)
        self.owner[value] = key
        return value

    def _next(self) -> int:
        value = self.counter
        self.counter += 1
        return value

    def global_key(self, key: str) -> int:
        found = self.by_key.get(key)
        if found is not None:
            return found
        value = key_id(key) if self.mode == "node-path" else self._next()
        self.by_key[key] = self._claim(value, key)
        return value

    def local_key(self, where: str) -> int:
        value = self._next()
        return self._claim(value, f"*{value}@{where}")

    def bump(self) -> None:
        if self.mode == "bump-counter":
            self.counter = (self.counter // BUMP + 1) * BUMP


def _check_value(rel: str, value, typ: str, where: str) -> None:
    ok = isinstance(value, str) if typ == "string" else isinstance(value, int)
    if not ok:
        raise TrapImportError(f"{where}: {rel} expects {typ}, got {value!r}")


def import_traps(traps: Iterable[TrapFile], mode: str = "node-path") -> Relations:
    """Build the EDB from trap files, in the given order.

    In ``node-path`` mode a global key's id is its FNV-1a hash with the top
    bit cleared; local ``*`` keys draw from a counter.  In ``bump-counter``
    mode every new key draws from the counter and ``bump_id_counter``
    advances it to the next multiple of one million.
    """
    ids = _IdAssigner(mode)
    edb: Relations = {rel: set() for rel in SCHEMA}
    for trap in traps:
        labels: dict[Label, int] = {}
        for n, d in enumerate(trap.directives, 1):
            where = f"{trap.path}:{n}"
            if isinstance(d, LabelDef):
                if d.label in labels:
                    raise TrapImportError(f"{where}: label {d.label} defined twice")
                labels[d.label] = ids.local_key(where) if d.key is None else ids.global_key(d.key)
            elif isinstance(d, TupleInsert):
                types = SCHEMA.get(d.relation)
                if types is None:
                    raise TrapImportError(f"{where}: unknown relation {d.relation}")
                if len(types) != len(d.args):
                    raise TrapImportError(f"{where}: {d.relation} takes {len(types)} columns")
                row = []
                for arg, typ in zip(d.args, types):
                    if isinstance(arg, Label):
                        if arg not in labels:
                            raise TrapImportError(f"{where}: dangling label {arg}")
                        if typ != "id":
                            raise TrapImportError(f"{where}: label {arg} in {typ} column of {d.relation}")
                        row.append(labels[arg])
                    else:
                        if typ == "id":
                            raise TrapImportError(f"{where}: {d.relation} expects a label, got {arg!r}")
                        _check_value(d.relation, arg, typ, where)
                        row.append(arg)
                edb[d.relation].add(tuple(row))
            elif isinstance(d, BumpIdCounter):
                ids.bump()
    return edb


def extract_sources(sources: Mapping[str, str]) -> list[TrapFile]:
    """Parse and extract every file, ordered by path."""
    return [extract_trap(parse_minilang(sources[path], path)) for path in sorted(sources)]


def build_edb(sources: Mapping[str, str], mode: str = "node-path") -> Relations:
    return import_traps(extract_sources(sources), mode)


def diff_edb(old: Mapping[str, set], new: Mapping[str, set]) -> Delta:
    """Minimal delta taking ``old`` to ``new``; both must share one schema."""
    if set(old) != set(new):
        raise SchemaMismatch(f"relation sets differ: {sorted(set(old) ^ set(new))}")
    for rel in old:
        arities = {len(r) for r in old[rel]} | {len(r) for r in new[rel]}
        if len(arities) > 1:
            raise SchemaMismatch(f"{rel}: mixed arities {sorted(arities)}")
    return diff_relations(old, new)
