"""MiniLang front end: parsing, trap extraction and EDB import."""

from .importer import (
    KeyCollision,
    SchemaMismatch,
    TrapImportError,
    build_edb,
    diff_edb,
    extract_sources,
    fnv1a_64,
    import_traps,
    key_id,
)
from .minilang import MiniLangSyntaxError, Node, format_minilang, parse_minilang
from .trap import (
    SCHEMA,
    BumpIdCounter,
    Label,
    LabelDef,
    TrapFile,
    TupleInsert,
    extract_trap,
    format_trap,
    parse_trap,
    schema_declarations,
)

__all__ = [
    "SCHEMA", "BumpIdCounter", "KeyCollision", "Label", "LabelDef", "MiniLangSyntaxError", "Node",
    "SchemaMismatch", "TrapFile", "TrapImportError", "TupleInsert", "build_edb", "diff_edb",
    "extract_sources", "extract_trap", "fnv1a_64", "format_minilang", "format_trap", "import_traps",
    "key_id", "parse_minilang", "parse_trap", "schema_declarations",
]
