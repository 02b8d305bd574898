"""Tuple numbering: stable integer ids for constructor instances.

Fresh ids live in the upper half of the 64-bit space (top bit set) so they
can never collide with the hash ids the importer assigns to AST nodes.
The pool never forgets a key; it grows without bound by design.
"""

from __future__ import annotations

import struct
from typing import Iterator

from .core import FRESH_BIT

_MAGIC = b"IDPOOL\x00"
_VERSION = 1
_HEADER = struct.Struct("<7sHQQ")  # magic, version, next counter, record count
_U16 = struct.Struct("<H")
_U32 = struct.Struct("<I")
_U64 = struct.Struct("<Q")
_I64 = struct.Struct("<q")


class PoolExhausted(Exception):
    pass


class FormatError(Exception):
    pass


def is_fresh(value: int) -> bool:
    return value >= FRESH_BIT


class IdPool:
    def __init__(self) -> None:
        self.mapping: dict[tuple[str, tuple], int] = {}
        self.next_hint = 0

    def __len__(self) -> int:
        return len(self.mapping)

    def __eq__(self, other: object) -> bool:
        return isinstance(other, IdPool) and self.mapping == other.mapping and self.next_hint == other.next_hint

    def __iter__(self) -> Iterator[tuple[tuple[str, tuple], int]]:
        return iter(self.mapping.items())

    def copy(self) -> "IdPool":
        pool = IdPool()
        pool.mapping = dict(self.mapping)
        pool.next_hint = self.next_hint
        return pool

    def number_tuple(self, ctor: str, args: tuple) -> int:
        key = (ctor, args)
        found = self.mapping.get(key)
        if found is not None:
            return found
        if self.next_hint >= FRESH_BIT:
            raise PoolExhausted(f"no fresh ids left for {ctor}{args}")
        new_id = FRESH_BIT | self.next_hint
        self.next_hint += 1
        self.mapping[key] = new_id
        return new_id

    def lookup(self, ctor: str, args: tuple) -> int | None:
        return self.mapping.get((ctor, args))


def number_tuple(pool: IdPool, ctor: str, args: tuple) -> int:
    return pool.number_tuple(ctor, args)


def _encode_value(value) -> bytes:
    if isinstance(value, str):
        raw = value.encode("utf-8")
        return b"s" + _U32.pack(len(raw)) + raw
    if value >= 0:
        return b"u" + _U64.pack(value)
    return b"i" + _I64.pack(value)


def dump_pool(pool: IdPool) -> bytes:
    parts = [_HEADER.pack(_MAGIC, _VERSION, pool.next_hint, len(pool.mapping))]
    for (ctor, args), value in pool.mapping.items():
        raw = ctor.encode("utf-8")
        body = [_U32.pack(len(raw)), raw, _U16.pack(len(args))]
        body += [_encode_value(a) for a in args]
        body.append(_U64.pack(value))
        record = b"".join(body)
        parts.append(_U32.pack(len(record)) + record)
    return b"".join(parts)


class _Reader:
    def __init__(self, data: bytes):
        self.data = data
        self.pos = 0

    def take(self, n: int) -> bytes:
        if self.pos + n > len(self.data):
            raise FormatError("truncated id pool")
        chunk = self.data[self.pos:self.pos + n]
        self.pos += n
        return chunk

    def unpack(self, st: struct.Struct):
        return st.unpack(self.take(st.size))[0]


def load_pool(data: bytes) -> IdPool:
    r = _Reader(data)
    if len(data) < _HEADER.size:
        raise FormatError("truncated id pool header")
    magic, version, next_hint, count = _HEADER.unpack(r.take(_HEADER.size))
    if magic != _MAGIC:
        raise FormatError("not an id pool file")
    if version != _VERSION:
        raise FormatError(f"unsupported id pool version {version}")
    pool = IdPool()
    pool.next_hint = next_hint
    for _ in range(count):
        length = r.unpack(_U32)
        rec = _Reader(r.take(length))
        ctor = rec.take(rec.unpack(_U32)).decode("utf-8")
        args = []
        for _ in range(rec.unpack(_U16)):
            tag = rec.take(1)
            if tag == b"s":
                args.append(rec.take(rec.unpack(_U32)).decode("utf-8"))
            elif tag == b"u":
                args.append(rec.unpack(_U64))
            elif tag == b"i":
                args.append(rec.unpack(_I64))
            else:
                raise FormatError(f"bad value tag {tag!r}")
        value = rec.unpack(_U64)
        if rec.pos != length:
            raise FormatError("trailing bytes in id pool record")
        key = (ctor, tuple(args))
        if key in pool.mapping or not is_fresh(value):
            raise FormatError(f"invalid id pool record {key}")
        pool.mapping[key] = value
    if r.pos != len(data):
        raise FormatError("trailing bytes after id pool")
    return pool
