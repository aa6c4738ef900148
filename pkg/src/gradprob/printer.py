"""Pretty-printers for source terms, target terms, types and distribution values.

`show_term` is the inverse of `parser.parse` on parse trees.  Precedence
levels, loosest first: 0 binders (let, if, lambda), 1 ascription,
2 choice, 3 addition, 4 application, 5 atoms.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import List, Optional, Tuple

from . import formula as F
from . import solver as S
from . import source as src
from . import target as tgt
from .gtypes import FDist, GDist, show_dist, show_prob, show_simple


def show_type(t, tags: bool = False) -> str:
    if isinstance(t, (GDist, FDist)):
        return show_dist(t, tags)
    return show_simple(t, tags)


def show_number(x: Fraction) -> str:
    return str(Fraction(x))


# ------------------------------------------------------------------- source


def _level(m) -> int:
    match m:
        case src.Let() | src.If() | src.Lam():
            return 0
        case src.AscSimple() | src.AscDist():
            return 1
        case src.Choice():
            return 2
        case src.Add():
            return 3
        case src.App():
            return 4
    return 5


def show_term(m, ctx: int = 0) -> str:
    """Source concrete syntax; parenthesises where the context binds tighter."""
    s = _show_source(m)
    return f"({s})" if _level(m) < ctx else s


def _show_source(m) -> str:
    match m:
        case src.Var(x):
            return x
        case src.RealLit(x):
            return show_number(x)
        case src.BoolLit(b):
            return "true" if b else "false"
        case src.Lam(x, ty, body):
            return f"\\{x}:{show_simple(ty)}. {show_term(body)}"
        case src.App(f, a):
            return f"{show_term(f, 4)} {show_term(a, 5)}"
        case src.Add(a, b):
            return f"{show_term(a, 3)} + {show_term(b, 4)}"
        case src.Choice(a, p, b):
            return f"{show_term(a, 2)} (+ {show_prob(p)} +) {show_term(b, 3)}"
        case src.AscSimple(v, ty) | src.AscDist(v, ty):
            return f"{show_term(v, 1)} :: {show_type(ty)}"
        case src.Let(x, a, b):
            return f"let {x} = {show_term(a)} in {show_term(b)}"
        case src.If(c, a, b):
            return f"if {show_term(c)} then {show_term(a)} else {show_term(b)}"
    raise TypeError(m)


# ------------------------------------------------------------------- target


def show_target(m) -> str:
    """TPLC concrete syntax: `[ε] u :: τ` ascriptions, `err@T` errors,
    `m (+ p1, p2 | φ +) n` choices and `case` blocks for per-type let bodies."""
    match m:
        case tgt.Var(x):
            return x
        case tgt.RealLit(x):
            return show_number(x)
        case tgt.BoolLit(b):
            return "true" if b else "false"
        case tgt.Lam(x, ty, body, _):
            return f"\\{x}:{show_simple(ty, True)}. {show_target(body)}"
        case tgt.ErrSimple(ty) | tgt.ErrDist(ty):
            return f"err@{show_type(ty, True)}"
        case tgt.Asc(ev, v, ty):
            inner = show_target(v)
            if isinstance(v, tgt.Lam) or isinstance(v, tgt.Asc):
                inner = f"({inner})"
            return f"[{show_simple(ev, True)}] {inner} :: {show_simple(ty, True)}"
        case tgt.App(f, a):
            return f"{_paren_target(f)} {_paren_target(a)}"
        case tgt.Add(a, b):
            return f"{_paren_target(a)} + {_paren_target(b)}"
        case tgt.Choice(a, phi, p1, p2, b):
            ps = f"{show_prob(p1)}, {show_prob(p2)} | {F.show(phi)}"
            return f"{_paren_target(a)} (+ {ps} +) {_paren_target(b)}"
        case tgt.AscDist(ev, a, ty, _):
            return f"[{show_dist(ev, True)}] ({show_target(a)}) :: {show_dist(ty, True)}"
        case tgt.Let(x, a, b, cases):
            head = f"let {x} = {show_target(a)} in "
            if not cases:
                return head + show_target(b)
            arms = " | ".join(f"{show_simple(t, True)} => {show_target(n)}" for t, n in cases)
            return head + "case { " + arms + " }"
        case tgt.If(c, a, b):
            return f"if {show_target(c)} then {show_target(a)} else {show_target(b)}"
    raise TypeError(m)


def _paren_target(m) -> str:
    s = show_target(m)
    simple = isinstance(m, (tgt.Var, tgt.ErrSimple, tgt.ErrDist))
    return s if simple else f"({s})"


# ------------------------------------------------------------------- values


def show_value(v) -> str:
    """A final value without its evidence: the raw value, or `err@σ`."""
    match v:
        case tgt.ErrSimple(ty):
            return f"err@{show_simple(ty)}"
        case tgt.Asc(_, tgt.Lam(x, ty, _, _), _):
            return f"<fun {x}:{show_simple(ty)}>"
        case tgt.Asc(_, raw, _):
            return show_target(raw)
    raise TypeError(v)


@dataclass(frozen=True)
class Entry:
    """One merged entry of a printed distribution."""
    value: str
    prob: Optional[Fraction]  # exact when every assignment agrees
    low: Optional[Fraction] = None
    high: Optional[Fraction] = None
    expr: str = ""

    @property
    def exact(self) -> bool:
        return self.prob is not None

    def prob_text(self) -> str:
        if self.prob is not None:
            return show_number(self.prob)
        return self.expr


def normalize(d) -> Tuple[List[Entry], str]:
    """Merge entries by printed value and fold each total to a rational.

    A total that takes a single value under the closing formula prints as
    that value; otherwise it keeps its symbolic form together with its exact
    range.  Also returns the residual constraint text (empty once every
    total is exact).
    """
    groups: dict = {}
    for v, p in d.entries:
        groups.setdefault(show_value(v), []).append(p)
    out = []
    for text, ps in groups.items():
        if all(isinstance(p, Fraction) for p in ps):
            out.append(Entry(text, sum(ps, Fraction(0))))
            continue
        total = F.total(ps)
        rng = S.prob_range(d.formula, total)
        if rng is not None and rng[0] == rng[1]:
            out.append(Entry(text, rng[0]))
        else:
            lo, hi = rng if rng is not None else (None, None)
            out.append(Entry(text, None, lo, hi, F.show_expr(total)))
    residual = "" if all(e.exact for e in out) else F.show(d.formula)
    return out, residual


def show_distvalue(d) -> str:
    entries, residual = normalize(d)
    body = ", ".join(f"{e.value}^{e.prob_text()}" for e in entries)
    return "{" + body + (f" | {residual}" if residual else "") + "}"
