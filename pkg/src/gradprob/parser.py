"""Concrete syntax for GPLC programs.

Grammar, loosest binding first:

    term   ::= let x = term in term | if term then term else term
             | \\x:T. term | asc
    asc    ::= choice (:: T)*
    choice ::= add ((+ p +) add)*
    add    ::= app (+ app)*
    app    ::= atom atom*
    atom   ::= x | true | false | number | ( term ) | \\x:T. term

    T      ::= Real | Bool | ? | ( T ) | T -> D | T -> T     (T -> S means T -> {S^1})
    D      ::= { T ^ p (, T ^ p)* }
    p      ::= integer | a/b | ?

Application, `+`, `if` and simple ascription take values only; other
operands are rejected after parsing with a suggested `let` rewrite.
`--` starts a comment that runs to the end of the line.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional

from . import source as S
from .gtypes import BOOL, DYN, REAL, UNKNOWN, Fun, GDist, dirac

KEYWORDS = {"let", "in", "if", "then", "else", "true", "false", "Real", "Bool"}

_TOKEN = re.compile(r"""
    (?P<ws>[ \t\r]+|--[^\n]*)
  | (?P<nl>\n)
  | (?P<num>-?\d+(?:/\d+)?)
  | (?P<ident>[A-Za-z_][A-Za-z0-9_']*)
  | (?P<sym>\(\+|\+\)|->|::|[\\.:=(){}^,+?])
""", re.X)


class ParseError(Exception):
    def __init__(self, message: str, span: Optional[S.Span] = None, hint: Optional[str] = None):
        where = f"{span}: " if span else ""
        text = f"{where}{message}"
        if hint:
            text += f"\n  hint: {hint}"
        super().__init__(text)
        self.message = message
        self.span = span
        self.hint = hint


@dataclass(frozen=True)
class Token:
    kind: str  # num | ident | sym | eof
    text: str
    span: S.Span


def tokenize(text: str) -> List[Token]:
    out = []
    pos, line, start = 0, 1, 0
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise ParseError(f"unexpected character {text[pos]!r}", S.Span(line, pos - start + 1))
        kind = m.lastgroup
        if kind == "nl":
            line, start = line + 1, m.end()
        elif kind != "ws":
            out.append(Token(kind, m.group(), S.Span(line, pos - start + 1)))
        pos = m.end()
    out.append(Token("eof", "", S.Span(line, pos - start + 1)))
    return out


def _number(text: str) -> Fraction:
    return Fraction(text)


class _Parser:
    def __init__(self, text: str):
        self.toks = tokenize(text)
        self.i = 0

    # token helpers
    @property
    def tok(self) -> Token:
        return self.toks[self.i]

    def at(self, text: str) -> bool:
        return self.tok.kind in ("sym", "ident") and self.tok.text == text

    def advance(self) -> Token:
        t = self.tok
        self.i += 1
        return t

    def expect(self, text: str) -> Token:
        if not self.at(text):
            self.error(f"expected {text!r}")
        return self.advance()

    def error(self, message: str):
        t = self.tok
        found = "end of input" if t.kind == "eof" else repr(t.text)
        raise ParseError(f"{message}, found {found}", t.span)

    def name(self) -> str:
        t = self.tok
        if t.kind != "ident" or t.text in KEYWORDS:
            self.error("expected a variable name")
        return self.advance().text

    # types
    def prob(self):
        if self.at("?"):
            self.advance()
            return UNKNOWN
        if self.tok.kind != "num":
            self.error("expected a probability")
        return _number(self.advance().text)

    def dist_type(self) -> GDist:
        self.expect("{")
        entries = []
        while True:
            t = self.simple_type()
            self.expect("^")
            entries.append((t, self.prob()))
            if self.at(","):
                self.advance()
                continue
            break
        self.expect("}")
        return GDist(tuple(entries))

    def type_atom(self):
        if self.at("Real"):
            self.advance()
            return REAL
        if self.at("Bool"):
            self.advance()
            return BOOL
        if self.at("?"):
            self.advance()
            return DYN
        if self.at("("):
            self.advance()
            t = self.simple_type()
            self.expect(")")
            return t
        self.error("expected a type")

    def simple_type(self):
        dom = self.type_atom()
        if not self.at("->"):
            return dom
        self.advance()
        cod = self.dist_type() if self.at("{") else dirac(self.simple_type())
        return Fun(dom, cod)

    def any_type(self):
        return self.dist_type() if self.at("{") else self.simple_type()

    # terms
    def term(self):
        t = self.tok
        if self.at("let"):
            self.advance()
            x = self.name()
            self.expect("=")
            a = self.term()
            self.expect("in")
            return S.Let(x, a, self.term(), span=t.span)
        if self.at("if"):
            self.advance()
            c = self.term()
            self.expect("then")
            a = self.term()
            self.expect("else")
            return S.If(c, a, self.term(), span=t.span)
        if self.at("\\"):
            return self.lam()
        return self.asc()

    def lam(self):
        t = self.expect("\\")
        x = self.name()
        self.expect(":")
        ty = self.simple_type()
        self.expect(".")
        return S.Lam(x, ty, self.term(), span=t.span)

    def asc(self):
        start = self.tok.span
        m = self.choice()
        while self.at("::"):
            self.advance()
            ty = self.any_type()
            if isinstance(ty, GDist):
                m = S.AscDist(m, ty, span=start)
            else:
                m = S.AscSimple(m, ty, span=start)
        return m

    def choice(self):
        start = self.tok.span
        m = self.add()
        while self.at("(+"):
            self.advance()
            p = self.prob()
            self.expect("+)")
            m = S.Choice(m, p, self.add(), span=start)
        return m

    def add(self):
        start = self.tok.span
        m = self.app()
        while self.at("+"):
            self.advance()
            m = S.Add(m, self.app(), span=start)
        return m

    def starts_atom(self) -> bool:
        t = self.tok
        if t.kind == "num":
            return True
        if t.kind == "ident":
            return t.text not in KEYWORDS or t.text in ("true", "false")
        return t.kind == "sym" and t.text in ("(", "\\")

    def app(self):
        start = self.tok.span
        m = self.atom()
        while self.starts_atom():
            m = S.App(m, self.atom(), span=start)
        return m

    def atom(self):
        t = self.tok
        if t.kind == "num":
            self.advance()
            return S.RealLit(_number(t.text), span=t.span)
        if self.at("true") or self.at("false"):
            self.advance()
            return S.BoolLit(t.text == "true", span=t.span)
        if self.at("("):
            self.advance()
            m = self.term()
            self.expect(")")
            return m
        if self.at("\\"):
            return self.lam()
        if t.kind == "ident" and t.text not in KEYWORDS:
            self.advance()
            return S.Var(t.text, span=t.span)
        self.error("expected a term")

    def program(self):
        m = self.term()
        if self.tok.kind != "eof":
            self.error("unexpected input after the program")
        return m


# ---------------------------------------------------------- normal-form check


def _check_anf(m) -> None:
    """Reject non-values in value positions, suggesting a `let` rewrite."""
    from .printer import show_term

    def need(v, where: str, whole, rebuild):
        if not S.is_value(v):
            hint = f"let tmp = {show_term(v)} in {rebuild('tmp')}"
            raise ParseError(f"{where} must be a value", getattr(v, "span", None) or whole.span, hint)

    match m:
        case S.Var() | S.RealLit() | S.BoolLit():
            return
        case S.Lam(_, _, body):
            _check_anf(body)
        case S.App(f, a):
            need(f, "the function in an application", m,
                 lambda t: show_term(S.App(S.Var(t), a)))
            need(a, "the argument in an application", m,
                 lambda t: show_term(S.App(f, S.Var(t))))
            _check_anf(f)
            _check_anf(a)
        case S.Add(a, b):
            need(a, "the left operand of +", m, lambda t: show_term(S.Add(S.Var(t), b)))
            need(b, "the right operand of +", m, lambda t: show_term(S.Add(a, S.Var(t))))
            _check_anf(a)
            _check_anf(b)
        case S.If(c, a, b):
            need(c, "the condition of if", m, lambda t: show_term(S.If(S.Var(t), a, b)))
            for x in (c, a, b):
                _check_anf(x)
        case S.AscSimple(v, ty):
            need(v, "a term ascribed a simple type", m,
                 lambda t: show_term(S.AscSimple(S.Var(t), ty)))
            _check_anf(v)
        case S.AscDist(a, _):
            _check_anf(a)
        case S.Let(_, a, b) | S.Choice(a, _, b):
            _check_anf(a)
            _check_anf(b)
        case _:
            raise TypeError(m)


def parse(text: str):
    """Parse a program into a source term; raises `ParseError`."""
    m = _Parser(text).program()
    _check_anf(m)
    return m


def parse_type(text: str):
    """Parse a simple or distribution type."""
    p = _Parser(text)
    t = p.any_type()
    if p.tok.kind != "eof":
        p.error("unexpected input after the type")
    return t
