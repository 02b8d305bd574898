"""The IncDL analysis language: syntax tree, parser, printer and static checks."""

from .syntax import (
    AGGREGATE_FUNCS,
    Aggregate,
    Atom,
    BuiltinCall,
    Comparison,
    Const,
    FreshId,
    Negation,
    Program,
    RelationDecl,
    Rule,
    Var,
    Wildcard,
)
from .parser import ParseError, parse_program
from .printer import format_program
from .checks import (
    Diagnostic,
    ProgramInfo,
    StratificationError,
    StratificationReport,
    ValidationError,
    check_program,
    reject_unsupported,
    stratify,
)

__all__ = [
    "AGGREGATE_FUNCS",
    "Aggregate",
    "Atom",
    "BuiltinCall",
    "Comparison",
    "Const",
    "Diagnostic",
    "FreshId",
    "Negation",
    "ParseError",
    "Program",
    "ProgramInfo",
    "RelationDecl",
    "Rule",
    "StratificationError",
    "StratificationReport",
    "ValidationError",
    "Var",
    "Wildcard",
    "check_program",
    "format_program",
    "parse_program",
    "reject_unsupported",
    "stratify",
]
