"""Lexer, recursive-descent parser and pretty-printer for netlist text.

Grammar (statements end with ``;``; ``//`` and ``/* */`` comments)::

    document  := 'circuit' IDENT '{' statement* '}'
    statement := 'rail' IDENT (',' IDENT)* ';'
               | [IDENT ':'] KIND port (',' port)* '->' IDENT (',' IDENT)* param* ';'
               | 'detect' IDENT (',' IDENT)* ';'
    port      := IDENT | 'vac'
    param     := IDENT '=' value
    value     := '?' IDENT | ['+'|'-'] NUMBER [('+'|'-') IMAG] | ['+'|'-'] IMAG

``KIND`` is one of bs, pbs, pbs_merge, hwp, delay, noise, phase.  ``IMAG``
is a number immediately followed by ``j``.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass, field
from typing import Union

from ..elements import Symbol
from ..errors import NetlistSyntaxError

KINDS = ("bs", "pbs", "pbs_merge", "hwp", "delay", "noise", "phase")
KEYWORDS = frozenset(("circuit", "rail", "detect", "vac") + KINDS)

_TOKEN_RE = re.compile(
    r"""
    (?P<ws>[ \t\r\n]+)
  | (?P<lcomment>//[^\n]*)
  | (?P<bcomment>/\*.*?\*/)
  | (?P<number>(?:\d+\.?\d*|\.\d+)(?:[eE][+-]?\d+)?j?)
  | (?P<ident>[^\W\d][\w.']*)
  | (?P<arrow>->)
  | (?P<punct>[{};,=?:+\-])
    """,
    re.VERBOSE | re.DOTALL,
)


@dataclass(frozen=True)
class Token:
    kind: str  # 'ident', 'keyword', 'number', 'imag', 'arrow', punctuation char, 'eof'
    text: str
    line: int
    column: int


@dataclass(frozen=True)
class Span:
    line: int
    column: int
    end_line: int
    end_column: int

    def contains(self, line: int, column: int) -> bool:
        return (self.line, self.column) <= (line, column) <= (self.end_line, self.end_column)


Value = Union[int, float, complex, Symbol]


@dataclass(frozen=True)
class RailDecl:
    names: tuple
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class ElementStmt:
    kind: str
    inputs: tuple  # str or None (vacuum port)
    outputs: tuple
    params: tuple = ()  # ((name, value), ...) in source order
    label: str | None = None
    span: Span | None = field(default=None, compare=False, repr=False)


@dataclass(frozen=True)
class DetectStmt:
    rails: tuple
    span: Span | None = field(default=None, compare=False, repr=False)


Statement = Union[RailDecl, ElementStmt, DetectStmt]


@dataclass(frozen=True)
class NetlistDocument:
    name: str
    statements: tuple


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    pos, line, line_start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN_RE.match(text, pos)
        if m is None:
            col = pos - line_start + 1
            if text.startswith("/*", pos):
                raise NetlistSyntaxError("unterminated block comment", line, col)
            raise NetlistSyntaxError(f"unexpected character {text[pos]!r}", line, col)
        kind = m.lastgroup
        tok = m.group()
        col = pos - line_start + 1
        if kind == "number":
            kind = "imag" if tok.endswith("j") else "number"
            end = m.end()
            if end < len(text) and re.match(r"[\w.]", text[end]):
                raise NetlistSyntaxError(f"malformed number {tok + text[end]!r}", line, col)
        elif kind == "ident":
            kind = "keyword" if tok in KEYWORDS else "ident"
        elif kind in ("punct",):
            kind = tok
        if kind not in ("ws", "lcomment", "bcomment"):
            tokens.append(Token(kind, tok, line, col))
        nl = tok.count("\n")
        if nl:
            line += nl
            line_start = pos + tok.rindex("\n") + 1
        pos = m.end()
    tokens.append(Token("eof", "", line, len(text) - line_start + 1))
    return tokens


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def _fail(self, expected):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise NetlistSyntaxError(f"unexpected {found}", t.line, t.column, expected)

    def accept(self, kind: str, text: str | None = None) -> Token | None:
        t = self.tok
        if t.kind == kind and (text is None or t.text == text):
            self.i += 1
            return t
        return None

    def expect(self, kind: str, text: str | None = None, what: str | None = None) -> Token:
        t = self.accept(kind, text)
        if t is None:
            self._fail([what or repr(text or kind)])
        return t

    def ident(self, what="identifier") -> str:
        return self.expect("ident", what=what).text

    def document(self) -> NetlistDocument:
        self.expect("keyword", "circuit")
        name = self.ident("circuit name")
        self.expect("{")
        stmts = []
        declared: dict[str, Token] = {}
        while not self.accept("}"):
            stmt = self.statement()
            if isinstance(stmt, RailDecl):
                for nm in stmt.names:
                    if nm in declared:
                        raise NetlistSyntaxError(
                            f"duplicate rail {nm!r}", stmt.span.line, stmt.span.column
                        )
                    declared[nm] = stmt
            stmts.append(stmt)
        self.expect("eof", what="end of input")
        return NetlistDocument(name, tuple(stmts))

    def _span(self, start: Token) -> Span:
        end = self.toks[self.i - 1]
        return Span(start.line, start.column, end.line, end.column + len(end.text) - 1)

    def _ident_list(self, what) -> tuple:
        names = [self.ident(what)]
        while self.accept(","):
            names.append(self.ident(what))
        return tuple(names)

    def statement(self) -> Statement:
        start = self.tok
        if self.accept("keyword", "rail"):
            names = self._ident_list("rail name")
            self.expect(";")
            return RailDecl(names, self._span(start))
        if self.accept("keyword", "detect"):
            rails = self._ident_list("rail name")
            self.expect(";")
            return DetectStmt(rails, self._span(start))
        label = None
        if self.tok.kind == "ident":
            label = self.ident()
            self.expect(":")
        t = self.tok
        if t.kind != "keyword" or t.text not in KINDS:
            expected = ["element kind"] if label else ["'rail'", "'detect'", "element kind", "label", "'}'"]
            self._fail(expected)
        self.i += 1
        inputs = [self.port()]
        while self.accept(","):
            inputs.append(self.port())
        self.expect("arrow", what="'->'")
        outputs = self._ident_list("output rail")
        params = []
        while self.tok.kind == "ident":
            pname = self.ident()
            self.expect("=")
            params.append((pname, self.value()))
        if not self.accept(";"):
            self._fail(["';'", "parameter"])
        return ElementStmt(t.text, tuple(inputs), outputs, tuple(params), label, self._span(start))

    def port(self):
        if self.accept("keyword", "vac"):
            return None
        if self.tok.kind == "ident":
            return self.ident()
        self._fail(["input rail", "'vac'"])

    def value(self) -> Value:
        if self.accept("?"):
            return Symbol(self.ident("symbol name"))
        sign = 1.0
        if self.accept("-"):
            sign = -1.0
        else:
            self.accept("+")
        t = self.tok
        if t.kind == "imag":
            self.i += 1
            return complex(0.0, sign * float(t.text[:-1]))
        if t.kind != "number":
            self._fail(["number", "'?'"])
        self.i += 1
        is_int = re.fullmatch(r"\d+", t.text) is not None
        real = sign * float(t.text)
        nxt = self.tok
        if nxt.kind in ("+", "-") and self.toks[self.i + 1].kind == "imag":
            self.i += 2
            im = float(self.toks[self.i - 1].text[:-1])
            return complex(real, -im if nxt.kind == "-" else im)
        if is_int:
            return -int(t.text) if sign < 0 else int(t.text)
        return real


def parse(text: str) -> NetlistDocument:
    """Parse netlist text into a :class:`NetlistDocument`.

    Raises :class:`~timebinsim.errors.NetlistSyntaxError` carrying the
    1-based line and column of the offending token.
    """
    if isinstance(text, bytes):
        text = text.decode("utf-8")
    return _Parser(text).document()


def _fmt_float(x: float) -> str:
    if not math.isfinite(x):
        raise ValueError(f"non-finite literal {x!r} cannot be printed")
    return repr(float(x))


def format_value(v: Value) -> str:
    if isinstance(v, Symbol):
        return f"?{v.name}"
    if isinstance(v, bool):
        raise TypeError("boolean parameters are not supported")
    if isinstance(v, int):
        return str(v)
    if isinstance(v, float):
        return _fmt_float(v)
    z = complex(v)
    im = z.imag
    sign = "-" if math.copysign(1.0, im) < 0 else "+"
    return f"{_fmt_float(z.real)}{sign}{_fmt_float(abs(im))}j"


def format_statement(stmt: Statement) -> str:
    if isinstance(stmt, RailDecl):
        return "rail " + ", ".join(stmt.names) + ";"
    if isinstance(stmt, DetectStmt):
        return "detect " + ", ".join(stmt.rails) + ";"
    ins = ", ".join("vac" if r is None else r for r in stmt.inputs)
    text = f"{stmt.kind} {ins} -> {', '.join(stmt.outputs)}"
    for name, val in stmt.params:
        text += f" {name}={format_value(val)}"
    if stmt.label:
        text = f"{stmt.label}: {text}"
    return text + ";"


def pretty_print(doc: NetlistDocument) -> str:
    lines = [f"circuit {doc.name} {{"]
    lines += ["  " + format_statement(s) for s in doc.statements]
    lines.append("}")
    return "\n".join(lines) + "\n"
