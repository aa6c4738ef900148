"""GPLC source terms in A-normal form.

SPLC programs are the subset with no `?` anywhere, so one AST serves both.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Optional

from .gtypes import GDist, GProb, Simple


@dataclass(frozen=True)
class Span:
    line: int
    col: int

    def __str__(self) -> str:
        return f"{self.line}:{self.col}"


def _span():
    return field(default=None, compare=False, repr=False)


class Term:
    __slots__ = ()


class Value(Term):
    __slots__ = ()


@dataclass(frozen=True)
class Var(Value):
    name: str
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class RealLit(Value):
    value: Fraction
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class BoolLit(Value):
    value: bool
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Lam(Value):
    param: str
    ty: Simple
    body: Term
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class App(Term):
    fn: Value
    arg: Value
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Let(Term):
    name: str
    bound: Term
    body: Term
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Choice(Term):
    left: Term
    prob: GProb
    right: Term
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class AscSimple(Term):
    value: Value
    ty: Simple
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class AscDist(Term):
    term: Term
    ty: GDist
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class If(Term):
    cond: Value
    then: Term
    orelse: Term
    span: Optional[Span] = _span()


@dataclass(frozen=True)
class Add(Term):
    left: Value
    right: Value
    span: Optional[Span] = _span()


def is_value(m: Term) -> bool:
    return isinstance(m, Value)


def size(m: Term) -> int:
    """Number of AST nodes."""
    match m:
        case Var() | RealLit() | BoolLit():
            return 1
        case Lam(_, _, body):
            return 1 + size(body)
        case App(a, b) | Add(a, b):
            return 1 + size(a) + size(b)
        case Let(_, a, b) | Choice(a, _, b):
            return 1 + size(a) + size(b)
        case AscSimple(v, _):
            return 1 + size(v)
        case AscDist(t, _):
            return 1 + size(t)
        case If(c, a, b):
            return 1 + size(c) + size(a) + size(b)
    raise TypeError(m)
