"""Symbolic probabilities: tagged variables, expressions and formulas.

Every probability that is not a literal lives in a variable ranging over
[0, 1].  Variables carry a left and a right index tag that links evidence
entries back to the entries of the types they relate.
"""

from __future__ import annotations

import contextlib
import contextvars
import itertools
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Iterator, Mapping, Union


@dataclass(frozen=True)
class TaggedVar:
    id: str
    left: int
    right: int

    def retag(self, left: int, right: int) -> "TaggedVar":
        return TaggedVar(self.id, left, right)

    def __str__(self) -> str:
        return self.id


SymProb = Union[Fraction, TaggedVar]


# ---------------------------------------------------------------- expressions


class Expr:
    __slots__ = ()

    def __add__(self, other): return Add(self, expr(other))
    def __radd__(self, other): return Add(expr(other), self)
    def __sub__(self, other): return Sub(self, expr(other))
    def __rsub__(self, other): return Sub(expr(other), self)
    def __mul__(self, other): return Mul(self, expr(other))
    def __rmul__(self, other): return Mul(expr(other), self)
    def __truediv__(self, other): return Div(self, expr(other))


@dataclass(frozen=True)
class Const(Expr):
    value: Fraction


@dataclass(frozen=True)
class Var(Expr):
    id: str


@dataclass(frozen=True)
class Add(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Sub(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Mul(Expr):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Div(Expr):
    left: Expr
    right: Expr


def expr(x) -> Expr:
    """Coerce a literal, tagged variable or expression into an expression."""
    if isinstance(x, Expr):
        return x
    if isinstance(x, TaggedVar):
        return Var(x.id)
    if isinstance(x, (int, Fraction)):
        return Const(Fraction(x))
    raise TypeError(f"not a symbolic probability: {x!r}")


def total(items: Iterable) -> Expr:
    """Left-nested sum; the empty sum is zero."""
    acc = None
    for item in items:
        e = expr(item)
        acc = e if acc is None else Add(acc, e)
    return Const(Fraction(0)) if acc is None else acc


# ------------------------------------------------------------------- formulas


class Formula:
    __slots__ = ()


@dataclass(frozen=True)
class Eq(Formula):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Leq(Formula):
    left: Expr
    right: Expr


@dataclass(frozen=True)
class Lt(Formula):
    """Strict inequality; only used for queries, never produced by typing."""
    left: Expr
    right: Expr


@dataclass(frozen=True)
class And(Formula):
    parts: tuple

    def __post_init__(self):
        if not isinstance(self.parts, tuple):
            object.__setattr__(self, "parts", tuple(self.parts))


TRUE = And(())
FALSE = Eq(Const(Fraction(0)), Const(Fraction(1)))


def conj(*formulas: Formula) -> Formula:
    """Flattened conjunction that drops `True` and duplicate conjuncts."""
    out: list = []
    seen = set()
    for f in formulas:
        for atom in atoms(f):
            if atom not in seen:
                seen.add(atom)
                out.append(atom)
    if len(out) == 1:
        return out[0]
    return And(tuple(out))


def atoms(f: Formula) -> Iterator[Formula]:
    if isinstance(f, And):
        for p in f.parts:
            yield from atoms(p)
    else:
        yield f


def eq(a, b) -> Formula:
    return Eq(expr(a), expr(b))


def leq(a, b) -> Formula:
    return Leq(expr(a), expr(b))


def lt(a, b) -> Formula:
    return Lt(expr(a), expr(b))


def unit(x) -> Formula:
    """x ranges over [0, 1]."""
    return conj(leq(0, x), leq(x, 1))


# ----------------------------------------------------------------- traversals


def expr_vars(e: Expr) -> set:
    match e:
        case Var(i):
            return {i}
        case Const():
            return set()
        case Add(a, b) | Sub(a, b) | Mul(a, b) | Div(a, b):
            return expr_vars(a) | expr_vars(b)
    raise TypeError(e)


def free_vars(f: Formula) -> set:
    out: set = set()
    for a in atoms(f):
        out |= expr_vars(a.left) | expr_vars(a.right)
    return out


def eval_expr(e: Expr, env: Mapping[str, Fraction]) -> Fraction:
    match e:
        case Const(v):
            return v
        case Var(i):
            return env[i]
        case Add(a, b):
            return eval_expr(a, env) + eval_expr(b, env)
        case Sub(a, b):
            return eval_expr(a, env) - eval_expr(b, env)
        case Mul(a, b):
            return eval_expr(a, env) * eval_expr(b, env)
        case Div(a, b):
            d = eval_expr(b, env)
            if d == 0:
                raise ZeroDivisionError("zero denominator")
            return eval_expr(a, env) / d
    raise TypeError(e)


def holds(f: Formula, env: Mapping[str, Fraction]) -> bool:
    """Exact evaluation; variables must lie in [0, 1], denominators nonzero."""
    for i in free_vars(f):
        if not (0 <= env[i] <= 1):
            return False
    try:
        for a in atoms(f):
            l, r = eval_expr(a.left, env), eval_expr(a.right, env)
            if isinstance(a, Eq) and l != r:
                return False
            if isinstance(a, Leq) and not l <= r:
                return False
            if isinstance(a, Lt) and not l < r:
                return False
    except ZeroDivisionError:
        return False
    return True


def subst_expr(e: Expr, m: Mapping[str, Expr]) -> Expr:
    match e:
        case Var(i):
            return m.get(i, e)
        case Const():
            return e
        case Add(a, b):
            return Add(subst_expr(a, m), subst_expr(b, m))
        case Sub(a, b):
            return Sub(subst_expr(a, m), subst_expr(b, m))
        case Mul(a, b):
            return Mul(subst_expr(a, m), subst_expr(b, m))
        case Div(a, b):
            return Div(subst_expr(a, m), subst_expr(b, m))
    raise TypeError(e)


def subst(f: Formula, m: Mapping[str, Expr]) -> Formula:
    if not m:
        return f
    if isinstance(f, And):
        return And(tuple(subst(p, m) for p in f.parts))
    return type(f)(subst_expr(f.left, m), subst_expr(f.right, m))


def rename(f: Formula, m: Mapping[str, str]) -> Formula:
    return subst(f, {k: Var(v) for k, v in m.items()})


def rename_expr(e, m: Mapping[str, str]) -> Expr:
    return subst_expr(expr(e), {k: Var(v) for k, v in m.items()})


# ------------------------------------------------------------- fresh variables


class Supply:
    """Issues names that never repeat within one supply."""

    def __init__(self, prefix: str = "w"):
        self.prefix = prefix
        self._counter = itertools.count()
        self._lock = threading.Lock()

    def name(self) -> str:
        with self._lock:
            return f"{self.prefix}{next(self._counter)}"


_supply: contextvars.ContextVar[Supply] = contextvars.ContextVar("supply", default=Supply())
_term_supply: contextvars.ContextVar[Supply] = contextvars.ContextVar(
    "term_supply", default=Supply("$e"))


@contextlib.contextmanager
def session():
    """Start numbering fresh names from zero, e.g. for reproducible output."""
    t1 = _supply.set(Supply())
    t2 = _term_supply.set(Supply("$e"))
    try:
        yield
    finally:
        _supply.reset(t1)
        _term_supply.reset(t2)


def fresh_name() -> str:
    return _supply.get().name()


def fresh_tagged_var(left: int, right: int) -> TaggedVar:
    return TaggedVar(fresh_name(), left, right)


def fresh_term_var() -> str:
    return _term_supply.get().name()


# ------------------------------------------------------------------- printing


def show_expr(e: Expr) -> str:
    match e:
        case Const(v):
            return str(v)
        case Var(i):
            return i
        case Add(a, b):
            return f"{show_expr(a)} + {show_expr(b)}"
        case Sub(a, b):
            return f"{show_expr(a)} - {_paren(b)}"
        case Mul(a, b):
            return f"{_paren(a)} * {_paren(b)}"
        case Div(a, b):
            return f"{_paren(a)} / {_paren(b)}"
    raise TypeError(e)


def _paren(e: Expr) -> str:
    s = show_expr(e)
    return s if isinstance(e, (Const, Var)) else f"({s})"


def show(f: Formula) -> str:
    parts = list(atoms(f))
    if not parts:
        return "true"
    ops = {Eq: "=", Leq: "<=", Lt: "<"}
    return " & ".join(f"{show_expr(a.left)} {ops[type(a)]} {show_expr(a.right)}" for a in parts)
