"""Canonical text form of IncDL programs."""

from __future__ import annotations

from .syntax import (
    Aggregate,
    Atom,
    BuiltinCall,
    Comparison,
    Const,
    FreshId,
    Literal,
    Negation,
    Program,
    Rule,
    Term,
    Var,
    Wildcard,
)


def format_string(value: str) -> str:
    escaped = value.replace("\\", "\\\\").replace('"', '\\"').replace("\n", "\\n").replace("\t", "\\t")
    return f'"{escaped}"'


def format_term(term: Term) -> str:
    if isinstance(term, Var):
        return term.name
    if isinstance(term, Wildcard):
        return "_"
    if isinstance(term, Const):
        if term.kind == "string":
            return format_string(term.value)
        if term.kind == "id":
            return f"#{term.value}"
        return str(term.value)
    raise TypeError(term)


def format_atom(atom: Atom) -> str:
    return f"{atom.pred}({', '.join(format_term(t) for t in atom.args)})"


def format_literal(lit: Literal) -> str:
    if isinstance(lit, Atom):
        return format_atom(lit)
    if isinstance(lit, Negation):
        return "not " + format_atom(lit.atom)
    if isinstance(lit, Comparison):
        return f"{format_term(lit.left)} {lit.op} {format_term(lit.right)}"
    if isinstance(lit, FreshId):
        return f"{lit.result.name} = new {lit.ctor}({', '.join(a.name for a in lit.args)})"
    if isinstance(lit, Aggregate):
        parts = [lit.result.name, "=", lit.func]
        if lit.value is not None:
            parts.append(lit.value.name)
        if lit.order is not None:
            parts += ["order", lit.order.name]
        return " ".join(parts) + " { " + format_atom(lit.atom) + " }"
    if isinstance(lit, BuiltinCall):
        args = ", ".join(format_term(t) for t in lit.args)
        return f"@{lit.name}[{', '.join(lit.inputs)}]({args})"
    raise TypeError(lit)


def format_rule(rule: Rule) -> str:
    body = ", ".join(format_literal(lit) for lit in rule.body)
    return f"{format_atom(rule.head)} :- {body}."


def format_program(program: Program) -> str:
    lines = [f".decl {d.name}({', '.join(d.types)})." for d in program.relations]
    lines += [format_rule(r) for r in program.rules]
    return "\n".join(lines) + "\n"
