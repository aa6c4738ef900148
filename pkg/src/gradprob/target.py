"""TPLC target terms: evidence-annotated, error-carrying, every value ascribed.

Two pieces of bookkeeping go beyond the bare grammar.  `Lam` records the
type of its body and `AscDist` records the type of the ascribed term, so
the evaluator never re-typechecks to recover them.  `Let` may carry one
body per entry type of the bound term, selected at runtime by the type a
value is ascribed to.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Optional

from . import formula as F
from .gtypes import FDist, Simple


class Term:
    __slots__ = ()


class Value(Term):
    __slots__ = ()


class Raw:
    __slots__ = ()


@dataclass(frozen=True)
class RealLit(Raw):
    value: Fraction


@dataclass(frozen=True)
class BoolLit(Raw):
    value: bool


@dataclass(frozen=True)
class Lam(Raw):
    param: str
    ty: Simple
    body: Term
    body_ty: Optional[FDist] = None


@dataclass(frozen=True)
class Var(Value):
    name: str


@dataclass(frozen=True)
class Asc(Value):
    """ε v :: τ.  A value when `value` is raw, a redex otherwise."""
    ev: Simple
    value: object
    ty: Simple


@dataclass(frozen=True)
class ErrSimple(Value):
    ty: Simple


@dataclass(frozen=True)
class App(Term):
    fn: Term
    arg: Term


@dataclass(frozen=True)
class Let(Term):
    name: str
    bound: Term
    body: Term
    cases: Optional[tuple] = None  # ((entry type, body), ...) when bodies differ


@dataclass(frozen=True)
class Choice(Term):
    left: Term
    formula: F.Formula
    p1: object
    p2: object
    right: Term


@dataclass(frozen=True)
class AscDist(Term):
    ev: FDist
    term: Term
    ty: FDist
    src: Optional[FDist] = None


@dataclass(frozen=True)
class If(Term):
    cond: Term
    then: Term
    orelse: Term


@dataclass(frozen=True)
class Add(Term):
    left: Term
    right: Term


@dataclass(frozen=True)
class ErrDist(Term):
    ty: FDist


def is_value(m) -> bool:
    if isinstance(m, Asc):
        return isinstance(m.value, Raw)
    return isinstance(m, (Var, ErrSimple))


def is_final(m) -> bool:
    """Closed values that can appear in a distribution value."""
    return (isinstance(m, Asc) and isinstance(m.value, Raw)) or isinstance(m, ErrSimple)


def free_term_vars(m) -> set:
    match m:
        case Var(x):
            return {x}
        case RealLit() | BoolLit() | ErrSimple() | ErrDist():
            return set()
        case Lam(x, _, body, _):
            return free_term_vars(body) - {x}
        case Asc(_, v, _):
            return free_term_vars(v)
        case App(a, b) | Add(a, b):
            return free_term_vars(a) | free_term_vars(b)
        case Let(x, a, b, cases):
            bodies = [b] if cases is None else [n for _, n in cases]
            out = free_term_vars(a)
            for n in bodies:
                out |= free_term_vars(n) - {x}
            return out
        case Choice(a, _, _, _, b):
            return free_term_vars(a) | free_term_vars(b)
        case AscDist(_, t, _, _):
            return free_term_vars(t)
        case If(c, a, b):
            return free_term_vars(c) | free_term_vars(a) | free_term_vars(b)
    raise TypeError(m)


def substitute(m, x: str, v):
    """m[v/x] for a closed value v; capture cannot happen."""
    match m:
        case Var(y):
            return v if y == x else m
        case RealLit() | BoolLit() | ErrSimple() | ErrDist():
            return m
        case Lam(y, ty, body, bty):
            return m if y == x else Lam(y, ty, substitute(body, x, v), bty)
        case Asc(ev, inner, ty):
            return Asc(ev, substitute(inner, x, v), ty)
        case App(a, b):
            return App(substitute(a, x, v), substitute(b, x, v))
        case Add(a, b):
            return Add(substitute(a, x, v), substitute(b, x, v))
        case Let(y, a, b, cases):
            a2 = substitute(a, x, v)
            if y == x:
                return Let(y, a2, b, cases)
            if cases is None:
                return Let(y, a2, substitute(b, x, v))
            return Let(y, a2, substitute(b, x, v), tuple((t, substitute(n, x, v)) for t, n in cases))
        case Choice(a, phi, p1, p2, b):
            return Choice(substitute(a, x, v), phi, p1, p2, substitute(b, x, v))
        case AscDist(ev, t, ty, src):
            return AscDist(ev, substitute(t, x, v), ty, src)
        case If(c, a, b):
            return If(substitute(c, x, v), substitute(a, x, v), substitute(b, x, v))
    raise TypeError(m)
