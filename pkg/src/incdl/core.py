"""Relations, deltas and the snapshot text format shared by engine and oracle."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Mapping

Row = tuple
Relations = dict[str, set]
Types = Mapping[str, tuple[str, ...]]

FRESH_BIT = 1 << 63


class DeltaError(Exception):
    """A delta violates its invariants or does not fit the current database."""


class SchemaError(Exception):
    """Tuples do not match the declared relation schema."""


@dataclass
class Delta:
    """Insertions and deletions against named relations.

    A tuple may not be both inserted and deleted in one delta; use
    :meth:`merge` to combine deltas with cancellation.
    """

    inserts: dict[str, set] = field(default_factory=dict)
    deletes: dict[str, set] = field(default_factory=dict)

    def insert(self, rel: str, row: Row) -> None:
        if row in self.deletes.get(rel, ()):
            raise DeltaError(f"{rel}{row} both inserted and deleted in one delta")
        self.inserts.setdefault(rel, set()).add(row)

    def delete(self, rel: str, row: Row) -> None:
        if row in self.inserts.get(rel, ()):
            raise DeltaError(f"{rel}{row} both inserted and deleted in one delta")
        self.deletes.setdefault(rel, set()).add(row)

    @classmethod
    def of(cls, inserts: Mapping[str, Iterable[Row]] = (), deletes: Mapping[str, Iterable[Row]] = ()) -> "Delta":
        d = cls()
        for rel, rows in dict(inserts).items():
            for row in rows:
                d.insert(rel, tuple(row))
        for rel, rows in dict(deletes).items():
            for row in rows:
                d.delete(rel, tuple(row))
        return d

    def relations(self) -> list[str]:
        return sorted(set(self.inserts) | set(self.deletes))

    def is_empty(self) -> bool:
        return not any(self.inserts.values()) and not any(self.deletes.values())

    def size(self) -> int:
        return sum(map(len, self.inserts.values())) + sum(map(len, self.deletes.values()))

    def inverse(self) -> "Delta":
        return Delta({r: set(s) for r, s in self.deletes.items()}, {r: set(s) for r, s in self.inserts.items()})

    def merge(self, later: "Delta") -> "Delta":
        """The single delta equivalent to applying ``self`` then ``later``."""
        out = Delta({r: set(s) for r, s in self.inserts.items()}, {r: set(s) for r, s in self.deletes.items()})
        for rel, rows in later.deletes.items():
            ins = out.inserts.setdefault(rel, set())
            dels = out.deletes.setdefault(rel, set())
            for row in rows:
                if row in ins:
                    ins.discard(row)
                else:
                    dels.add(row)
        for rel, rows in later.inserts.items():
            ins = out.inserts.setdefault(rel, set())
            dels = out.deletes.setdefault(rel, set())
            for row in rows:
                if row in dels:
                    dels.discard(row)
                else:
                    ins.add(row)
        return out

    def signed(self, rel: str) -> dict:
        """The delta of one relation as ``row -> +1/-1``."""
        out = {row: 1 for row in self.inserts.get(rel, ())}
        for row in self.deletes.get(rel, ()):
            out[row] = -1
        return out

    def check_against(self, db: Mapping[str, set]) -> None:
        for rel, rows in self.deletes.items():
            current = db.get(rel, set())
            for row in rows:
                if row not in current:
                    raise DeltaError(f"cannot delete absent tuple {rel}{row}")

    def apply_to(self, db: Relations) -> None:
        self.check_against(db)
        for rel, rows in self.deletes.items():
            db[rel] -= rows
        for rel, rows in self.inserts.items():
            db.setdefault(rel, set()).update(rows)


def copy_relations(db: Mapping[str, set]) -> Relations:
    return {rel: set(rows) for rel, rows in db.items()}


def diff_relations(old: Mapping[str, set], new: Mapping[str, set]) -> Delta:
    """Minimal delta taking ``old`` to ``new``."""
    d = Delta()
    for rel in sorted(set(old) | set(new)):
        a = old.get(rel, set())
        b = new.get(rel, set())
        added = b - a
        removed = a - b
        if added:
            d.inserts[rel] = added
        if removed:
            d.deletes[rel] = removed
    return d


def impact(old: Mapping[str, set], new: Mapping[str, set]) -> int:
    """Tuples inserted plus deleted between two snapshots."""
    total = 0
    for rel in set(old) | set(new):
        a = old.get(rel, set())
        b = new.get(rel, set())
        total += len(a ^ b) if a or b else 0
    return total


def check_rows(rel: str, rows: Iterable[Row], types: tuple[str, ...]) -> None:
    for row in rows:
        if len(row) != len(types):
            raise SchemaError(f"{rel}{row} has arity {len(row)}, expected {len(types)}")
        for value, typ in zip(row, types):
            ok = isinstance(value, str) if typ == "string" else (
                isinstance(value, int) and not isinstance(value, bool))
            if typ == "id" and ok:
                ok = 0 <= value < (1 << 64)
            if not ok:
                raise SchemaError(f"{rel}{row}: {value!r} is not of type {typ}")


# ---------------------------------------------------------------------------
# snapshot text format: "rel<TAB>v1<TAB>v2", sorted, ids as #<u64>


def _escape(value: str) -> str:
    return value.replace("\\", "\\\\").replace("\t", "\\t").replace("\n", "\\n")


def _unescape(text: str) -> str:
    out = []
    i = 0
    while i < len(text):
        if text[i] == "\\" and i + 1 < len(text):
            out.append({"t": "\t", "n": "\n", "\\": "\\"}[text[i + 1]])
            i += 2
        else:
            out.append(text[i])
            i += 1
    return "".join(out)


def format_value(value, typ: str) -> str:
    if typ == "id":
        return f"#{value}"
    if typ == "string":
        return _escape(value)
    return str(value)


def format_snapshot(db: Mapping[str, set], types: Types, relations: Iterable[str] | None = None) -> str:
    names = sorted(relations if relations is not None else db)
    lines = []
    for rel in names:
        col_types = types[rel]
        for row in sorted(db.get(rel, ())):
            lines.append("\t".join([rel, *(format_value(v, t) for v, t in zip(row, col_types))]))
    return "".join(line + "\n" for line in lines)


def parse_snapshot(text: str, types: Types) -> Relations:
    db: Relations = {}
    for line in text.splitlines():
        rel, *fields = line.split("\t")
        row = []
        for field_text, typ in zip(fields, types[rel]):
            if typ == "id":
                row.append(int(field_text[1:]))
            elif typ == "int":
                row.append(int(field_text))
            else:
                row.append(_unescape(field_text))
        db.setdefault(rel, set()).add(tuple(row))
    return db
