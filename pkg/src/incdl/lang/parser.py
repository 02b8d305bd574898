"""Recursive-descent parser for IncDL.  The grammar is documented in docs/incdl.grammar."""

from __future__ import annotations

import re
from dataclasses import dataclass

from .syntax import (
    AGGREGATE_FUNCS,
    COLUMN_TYPES,
    Aggregate,
    Atom,
    BuiltinCall,
    Comparison,
    Const,
    FreshId,
    Literal,
    Negation,
    Program,
    RelationDecl,
    Rule,
    Span,
    Term,
    Var,
    Wildcard,
)

KEYWORDS = frozenset({"not", "new", "order", *AGGREGATE_FUNCS, *COLUMN_TYPES})


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int, expected: frozenset[str] = frozenset()):
        self.message = message
        self.line = line
        self.col = col
        self.expected = expected
        detail = f" (expected one of: {', '.join(sorted(expected))})" if expected else ""
        super().__init__(f"{line}:{col}: {message}{detail}")


@dataclass(frozen=True)
class Token:
    kind: str  # ident, int, string, idconst, punct, eof
    text: str
    line: int
    col: int


_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<comment>(//|%)[^\n]*)
  | (?P<decl>\.decl\b)
  | (?P<idconst>\#[0-9]+)
  | (?P<int>-?[0-9]+)
  | (?P<string>"(?:[^"\\\n]|\\.)*")
  | (?P<ident>[A-Za-z_][A-Za-z0-9_]*)
  | (?P<punct>:-|!=|<=|>=|[(){}\[\],.=<>@!])
    """,
    re.VERBOSE,
)

_ESCAPES = {"n": "\n", "t": "\t", "\\": "\\", '"': '"'}


def _unescape(body: str, line: int, col: int) -> str:
    out = []
    i = 0
    while i < len(body):
        ch = body[i]
        if ch == "\\":
            nxt = body[i + 1]
            if nxt not in _ESCAPES:
                raise ParseError(f"unknown escape \\{nxt}", line, col + i)
            out.append(_ESCAPES[nxt])
            i += 2
        else:
            out.append(ch)
            i += 1
    return "".join(out)


def tokenize(source: str) -> list[Token]:
    tokens: list[Token] = []
    pos = 0
    line = 1
    line_start = 0
    while pos < len(source):
        m = _TOKEN_RE.match(source, pos)
        col = pos - line_start + 1
        if m is None:
            raise ParseError(f"unexpected character {source[pos]!r}", line, col)
        kind = m.lastgroup
        text = m.group()
        if kind not in ("ws", "comment"):
            tokens.append(Token(kind, text, line, col))
        newlines = text.count("\n")
        if newlines:
            line += newlines
            line_start = pos + text.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, pos - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, source: str):
        self.tokens = tokenize(source)
        self.pos = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.pos]

    def peek(self, k: int = 1) -> Token:
        return self.tokens[min(self.pos + k, len(self.tokens) - 1)]

    def error(self, message: str, *expected: str) -> ParseError:
        return ParseError(message, self.tok.line, self.tok.col, frozenset(expected))

    def at(self, text: str) -> bool:
        return self.tok.kind == "punct" and self.tok.text == text

    def at_kw(self, word: str) -> bool:
        return self.tok.kind == "ident" and self.tok.text == word

    def expect(self, text: str) -> Token:
        if not self.at(text):
            found = self.tok.text or "end of input"
            raise self.error(f"unexpected {found!r}", repr(text))
        t = self.tok
        self.pos += 1
        return t

    def name(self, what: str) -> Token:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS or t.text == "_":
            found = t.text or "end of input"
            raise self.error(f"expected {what}, found {found!r}", what)
        self.pos += 1
        return t

    # program ------------------------------------------------------------

    def program(self) -> Program:
        decls: list[RelationDecl] = []
        rules: list[Rule] = []
        while self.tok.kind != "eof":
            if self.tok.kind == "decl":
                start = self.tok
                self.pos += 1
                name = self.name("relation name")
                decls.append(self.decl_rest(name, start))
            elif self.tok.kind == "ident":
                item = self.clause()
                (decls if isinstance(item, RelationDecl) else rules).append(item)
            else:
                raise self.error(f"unexpected {self.tok.text or 'end of input'!r}", "relation name", ".decl")
        return Program(tuple(decls), tuple(rules))

    def decl_rest(self, name: Token, start: Token) -> RelationDecl:
        self.expect("(")
        types = [self.column_type()]
        while self.at(","):
            self.pos += 1
            types.append(self.column_type())
        self.expect(")")
        self.expect(".")
        return RelationDecl(name.text, tuple(types), Span(start.line, start.col))

    def column_type(self) -> str:
        t = self.tok
        if t.kind == "ident" and t.text in COLUMN_TYPES:
            self.pos += 1
            return t.text
        raise self.error("expected column type", *COLUMN_TYPES)

    def clause(self) -> RelationDecl | Rule:
        start = self.tok
        name = self.name("relation name")
        # `edge(int, int).` declares an EDB relation; anything else is a rule head.
        if self.at("(") and self.peek().kind == "ident" and self.peek().text in COLUMN_TYPES:
            return self.decl_rest(name, start)
        head = self.atom_rest(name.text)
        if self.at("."):
            raise self.error("rules need a body; facts come from the EDB", ":-")
        self.expect(":-")
        body = [self.literal()]
        while self.at(","):
            self.pos += 1
            body.append(self.literal())
        self.expect(".")
        return Rule(head, tuple(body), Span(start.line, start.col))

    # literals -----------------------------------------------------------

    def atom_rest(self, pred: str) -> Atom:
        return Atom(pred, self.term_list())

    def term_list(self) -> tuple[Term, ...]:
        self.expect("(")
        args: list[Term] = []
        if not self.at(")"):
            args.append(self.term())
            while self.at(","):
                self.pos += 1
                args.append(self.term())
        if not self.at(")"):
            raise self.error(f"unexpected {self.tok.text or 'end of input'!r}", ",", ")")
        self.pos += 1
        return tuple(args)

    def term(self) -> Term:
        t = self.tok
        if t.kind == "int":
            self.pos += 1
            return Const(int(t.text), "int")
        if t.kind == "string":
            self.pos += 1
            return Const(_unescape(t.text[1:-1], t.line, t.col + 1), "string")
        if t.kind == "idconst":
            self.pos += 1
            return Const(int(t.text[1:]), "id")
        if t.kind == "ident" and t.text == "_":
            self.pos += 1
            return Wildcard()
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.pos += 1
            return Var(t.text)
        raise self.error(f"expected a term, found {t.text or 'end of input'!r}", "variable", "_", "integer", "string", "#id")

    def literal(self) -> Literal:
        t = self.tok
        if self.at_kw("not") or self.at("!"):
            self.pos += 1
            name = self.name("relation name")
            return Negation(self.atom_rest(name.text))
        if self.at("@"):
            self.pos += 1
            name = self.name("built-in name")
            self.expect("[")
            inputs = [self.name("relation name").text]
            while self.at(","):
                self.pos += 1
                inputs.append(self.name("relation name").text)
            self.expect("]")
            return BuiltinCall(name.text, tuple(inputs), self.term_list())
        if t.kind == "ident" and t.text not in KEYWORDS and t.text != "_" and self.peek().text == "(":
            self.pos += 1
            return self.atom_rest(t.text)
        left = self.term()
        if self.at("=") and isinstance(left, Var):
            nxt = self.peek()
            if nxt.kind == "ident" and nxt.text == "new":
                self.pos += 2
                return self.fresh_rest(left)
            if nxt.kind == "ident" and nxt.text in AGGREGATE_FUNCS:
                self.pos += 2
                return self.aggregate_rest(left, nxt.text)
        op = self.tok.text if self.tok.kind == "punct" else ""
        if op not in ("=", "!=", "<", "<=", ">", ">="):
            raise self.error(f"expected comparison operator, found {self.tok.text or 'end of input'!r}",
                             "=", "!=", "<", "<=", ">", ">=")
        self.pos += 1
        right = self.term()
        if op == ">":
            return Comparison("<", right, left)
        if op == ">=":
            return Comparison("<=", right, left)
        return Comparison(op, left, right)

    def fresh_rest(self, result: Var) -> FreshId:
        ctor = self.name("constructor name")
        self.expect("(")
        args: list[Var] = []
        if not self.at(")"):
            args.append(self.var())
            while self.at(","):
                self.pos += 1
                args.append(self.var())
        self.expect(")")
        return FreshId(result, ctor.text, tuple(args))

    def var(self) -> Var:
        t = self.term()
        if not isinstance(t, Var):
            raise ParseError("expected a variable", self.tokens[self.pos - 1].line,
                             self.tokens[self.pos - 1].col, frozenset({"variable"}))
        return t

    def aggregate_rest(self, result: Var, func: str) -> Aggregate:
        value = order = None
        if func != "count":
            value = self.var()
        if func == "concat" and self.at_kw("order"):
            self.pos += 1
            order = self.var()
        self.expect("{")
        name = self.name("relation name")
        atom = self.atom_rest(name.text)
        self.expect("}")
        return Aggregate(result, func, value, order, atom)


def parse_program(source: str, validate: bool = True) -> Program:
    """Parse IncDL source text.

    With ``validate`` (the default) the program is also checked for
    declaration, arity, typing and range-restriction errors, raising
    :class:`~incdl.lang.checks.ValidationError`.
    """
    program = _Parser(source).program()
    if validate:
        from .checks import check_program

        check_program(program)
    return program
