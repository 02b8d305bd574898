"""Random stratified programs, EDBs and delta sequences for oracle trials."""

from __future__ import annotations

import random
from dataclasses import dataclass

from ..core import Delta, Relations
from ..lang import Program, parse_program, stratify

# name -> column types; ``root`` feeds @dominators and holds at most one row
EDB_POOL: dict[str, tuple[str, ...]] = {
    "e": ("id", "id"),
    "f": ("id", "id"),
    "w": ("id", "id", "int"),
    "lbl": ("id", "string"),
    "num": ("id", "int"),
    "root": ("id",),
}
IDB_SHAPES = (("id",), ("id", "id"), ("id", "id"), ("id", "int"), ("id", "string"))
ID_DOMAIN = 6
INT_DOMAIN = 4
STRINGS = ("a", "b", "c")
MAX_PREDS = 8


@dataclass
class RandomProgram:
    source: str
    program: Program
    edb_types: dict[str, tuple[str, ...]]


def _value(rng: random.Random, typ: str):
    if typ == "id":
        return rng.randrange(ID_DOMAIN)
    if typ == "int":
        return rng.randrange(INT_DOMAIN)
    return rng.choice(STRINGS)


def _literal(value, typ: str) -> str:
    if typ == "string":
        return f'"{value}"'
    return f"#{value}" if typ == "id" else str(value)


class _RuleGen:
    def __init__(self, rng: random.Random, types: dict[str, tuple[str, ...]], level: dict[str, int]):
        self.rng = rng
        self.types = types
        self.level = level
        self.vars: dict[str, str] = {}  # bound name -> type

    def fresh_var(self, typ: str) -> str:
        name = f"{typ[0]}{len(self.vars)}"
        self.vars[name] = typ
        return name

    def bound_of(self, typ: str) -> list[str]:
        return [v for v, t in self.vars.items() if t == typ]

    def positive(self, pred: str) -> str:
        args = []
        for typ in self.types[pred]:
            r = self.rng.random()
            same = self.bound_of(typ)
            if same and r < 0.55:
                args.append(self.rng.choice(same))
            elif r < 0.65:
                args.append("_")
            elif r < 0.72:
                args.append(_literal(_value(self.rng, typ), typ))
            else:
                args.append(self.fresh_var(typ))
        return f"{pred}({', '.join(args)})"

    def negative(self, pred: str) -> str:
        args = []
        for typ in self.types[pred]:
            same = self.bound_of(typ)
            r = self.rng.random()
            if same and r < 0.75:
                args.append(self.rng.choice(same))
            elif r < 0.9:
                args.append("_")
            else:
                args.append(_literal(_value(self.rng, typ), typ))
        return f"!{pred}({', '.join(args)})"

    def comparison(self) -> str | None:
        candidates = [v for v in self.vars]
        if not candidates:
            return None
        left = self.rng.choice(candidates)
        typ = self.vars[left]
        others = [v for v in self.bound_of(typ) if v != left]
        right = self.rng.choice(others) if others and self.rng.random() < 0.6 else _literal(_value(self.rng, typ), typ)
        ops = ("!=", "=") if typ == "id" else ("<", "<=", "!=", "=")
        return f"{left} {self.rng.choice(ops)} {right}"

    def head(self, pred: str, types: tuple[str, ...], extra: dict[str, str] | None = None) -> str | None:
        pool = dict(self.vars)
        pool.update(extra or {})
        args = []
        for typ in types:
            same = [v for v, t in pool.items() if t == typ]
            if not same:
                return None
            args.append(self.rng.choice(same))
        return f"{pred}({', '.join(args)})"


def _rule(rng: random.Random, head: str, types: dict[str, tuple[str, ...]], level: dict[str, int],
          builtin_ok: bool) -> str | None:
    """One rule for ``head``, or None when the random choices do not fit its columns."""
    g = _RuleGen(rng, types, level)
    lvl = level[head]
    lower = sorted(p for p in types if level[p] < lvl)
    same = sorted(p for p in types if level[p] == lvl and p in level and lvl > 0)
    shape = rng.random()
    body: list[str] = []
    extra: dict[str, str] = {}
    want = types[head]

    if shape < 0.15 and lower:
        # aggregate over a lower predicate, grouped by an id bound outside it
        func = rng.choice(("count", "sum", "min", "max", "concat"))
        need = {"concat": "string", "count": None}.get(func, "int")
        fits = [p for p in lower if need is None or need in types[p]]
        if not fits:
            func, fits = "count", lower
        src = rng.choice(fits)
        outer = rng.choice(lower)
        body.append(g.positive(outer))
        cols = types[src]
        key_vars = g.bound_of("id")
        inner = []
        value = None
        for typ in cols:
            if typ == "id" and key_vars and rng.random() < 0.5:
                inner.append(rng.choice(key_vars))
            elif value is None and ((func in ("sum", "min", "max") and typ == "int")
                                    or (func == "concat" and typ == "string")):
                value = "agg_in"
                inner.append(value)
            else:
                inner.append("_")
        if func != "count" and value is None:
            func = "count"
        result_type = "string" if func == "concat" else "int"
        part = f"{value} " if value else ""
        body.append(f"r = {func} {part}{{ {src}({', '.join(inner)}) }}")
        extra["r"] = result_type
    elif shape < 0.25 and lower:
        # fresh id over lower predicates only
        for _ in range(rng.randint(1, 2)):
            body.append(g.positive(rng.choice(lower)))
        if not g.vars:
            return None
        args = rng.sample(sorted(g.vars), min(len(g.vars), rng.randint(1, 2)))
        body.append(f"nv = new C{head}({', '.join(args)})")
        extra["nv"] = "id"
    elif shape < 0.37 and builtin_ok:
        name = rng.choice(("shortest_path", "dominators", "concat"))
        if name == "shortest_path":
            body.append("@shortest_path[w](ba, bb, bd)")
            extra.update(ba="id", bb="id", bd="int")
        elif name == "dominators":
            body.append("@dominators[e, root](ba, bb)")
            extra.update(ba="id", bb="id")
        else:
            body.append("@concat[lbl](ba, bs)")
            extra.update(ba="id", bs="string")
        g.vars.update(extra)
        extra = {}
    else:
        candidates = lower + same if lower else same
        if not candidates:
            return None
        for k in range(rng.randint(1, 3)):
            pick = rng.choice(same) if same and rng.random() < 0.35 and k > 0 else rng.choice(candidates)
            body.append(g.positive(pick))
        if lower and rng.random() < 0.3:
            body.append(g.negative(rng.choice(lower)))
    if rng.random() < 0.3:
        cmp = g.comparison()
        if cmp:
            body.append(cmp)
    if not body:
        return None
    h = g.head(head, want, extra)
    if h is None:
        return None
    return f"{h} :- {', '.join(body)}."


def random_program(rng: random.Random, max_preds: int = MAX_PREDS) -> RandomProgram:
    """A valid stratified program over at most ``max_preds`` relations.

    Predicates are drawn in levels; a rule reads lower levels freely and
    its own level only positively, which keeps every cycle monotone.
    """
    while True:
        n_edb = rng.randint(2, 4)
        edb_names = sorted(rng.sample(sorted(EDB_POOL), n_edb))
        builtin_ok = {"e", "w", "lbl", "root"} <= set(edb_names) or rng.random() < 0.4
        if builtin_ok:
            edb_names = sorted(set(edb_names) | {"e", "w", "lbl", "root"})
        n_idb = max(1, min(max_preds - len(edb_names), rng.randint(2, 5)))
        types = {name: EDB_POOL[name] for name in edb_names}
        level = {name: 0 for name in edb_names}
        lvl = 1
        for i in range(n_idb):
            name = f"p{i}"
            types[name] = rng.choice(IDB_SHAPES)
            level[name] = lvl
            if rng.random() < 0.6:
                lvl += 1
        rules = []
        for i in range(n_idb):
            head = f"p{i}"
            made = 0
            for _ in range(40):
                if made >= rng.randint(1, 3):
                    break
                r = _rule(rng, head, types, level, builtin_ok)
                if r is not None:
                    rules.append(r)
                    made += 1
        decls = [f".decl {name}({', '.join(types[name])})." for name in edb_names]
        source = "\n".join(decls + rules) + "\n"
        try:
            program = parse_program(source)
        except Exception:  # noqa: BLE001 - retry on any rejected draw
            continue
        if stratify(program).errors or not program.rules:
            continue
        return RandomProgram(source, program, {name: EDB_POOL[name] for name in edb_names})


def random_row(rng: random.Random, types: tuple[str, ...]) -> tuple:
    return tuple(_value(rng, t) for t in types)


def random_edb(rng: random.Random, edb_types: dict[str, tuple[str, ...]], max_tuples: int = 200) -> Relations:
    budget = rng.randint(0, min(max_tuples, 12 * len(edb_types)))
    edb: Relations = {rel: set() for rel in edb_types}
    rels = sorted(edb_types)
    for _ in range(budget):
        rel = rng.choice(rels)
        if rel == "root" and edb[rel]:
            continue
        edb[rel].add(random_row(rng, edb_types[rel]))
    return edb


def random_delta(rng: random.Random, current: Relations, edb_types: dict[str, tuple[str, ...]],
                 max_tuples: int = 200) -> Delta:
    """A valid delta against ``current``: deletes of present rows, inserts of absent ones."""
    d = Delta()
    for rel in sorted(edb_types):
        rows = current[rel]
        for _ in range(rng.randrange(4)):
            if rel == "root":
                # keep at most one entry: replace, add or drop it
                if rows and rng.random() < 0.5:
                    old = next(iter(rows))
                    if old not in d.deletes.get(rel, ()):
                        d.delete(rel, old)
                if not (rows - d.deletes.get(rel, set())) and rng.random() < 0.7 and not d.inserts.get(rel):
                    new = random_row(rng, edb_types[rel])
                    if new not in rows:
                        d.insert(rel, new)
                break
            row = random_row(rng, edb_types[rel])
            if row in rows:
                if row not in d.deletes.get(rel, ()):
                    d.delete(rel, row)
            elif len(rows) < max_tuples // len(edb_types) and row not in d.inserts.get(rel, ()):
                d.insert(rel, row)
    return d
