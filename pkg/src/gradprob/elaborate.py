"""Type-directed elaboration of GPLC source terms into TPLC.

The walk computes the same gradual types as the GPLC checker and checks the
same premises, so a failing premise surfaces as a `TypeCheckError`.  A meet
that is undefined after its consistency premise held is an internal bug.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional

from . import formula as F
from . import relations as R
from . import source as src
from . import target as tgt
from .checker import _fail, _require, _SourceChecker
from .gtypes import (BOOL, REAL, Fun, Simple, Undefined, dirac,
                     fsum, gcod, gdom, gscale, gsum, psub, scale)
from .solver import SolverUnknown


class ElaborationBug(Exception):
    """An evidence meet was undefined although its premise held."""


@dataclass(frozen=True)
class ElabOutput:
    target: object
    ty: object


def _meet(a, b):
    try:
        return R.meet(a, b)
    except Undefined as e:
        raise ElaborationBug(f"undefined meet: {e}") from None
    except SolverUnknown as e:
        _fail("solver-unknown", f"evidence meet is undecided ({e.reason})", query=e.query)


class _Elaborator:
    def __init__(self):
        self.check = _SourceChecker(False)

    def value(self, env: Mapping[str, Simple], v):
        """Γ ⊢ v ⇝ v' : S for source values."""
        match v:
            case src.RealLit(x):
                return tgt.Asc(_meet(REAL, REAL), tgt.RealLit(x), REAL), REAL
            case src.BoolLit(b):
                return tgt.Asc(_meet(BOOL, BOOL), tgt.BoolLit(b), BOOL), BOOL
            case src.Var(x):
                if x not in env:
                    _fail("unbound var", f"unbound variable {x}", v.span)
                return tgt.Var(x), env[x]
            case src.Lam(x, ty, body):
                _require(lambda: R.wf_simple(ty), "ill-formed type",
                         "parameter annotation is not well-formed", v.span, (ty,))
                b, g = self.term({**env, x: ty}, body)
                ev = R.lift_simple(Fun(ty, g))
                lam = tgt.Lam(x, R.lift_simple(ty), b, ev.cod)
                return tgt.Asc(ev, lam, ev), Fun(ty, g)
        raise TypeError(v)

    def term(self, env: Mapping[str, Simple], m):
        """Γ ⊢ m ⇝ m' : G."""
        match m:
            case src.Var() | src.RealLit() | src.BoolLit() | src.Lam():
                v, s = self.value(env, m)
                return v, dirac(s)

            case src.App(v, w):
                fv, s = self.value(env, v)
                av, s2 = self.value(env, w)
                try:
                    d, c = gdom(s), gcod(s)
                except Undefined:
                    _fail("non-function application", "applying a value that is not a function",
                          m.span, (s,))
                _require(lambda: R.consistent(s2, d), "inconsistency",
                         "argument type does not match the domain", m.span, (s2, d))
                dom_t = R.lift_simple(d)
                fun_t = R.lift_simple(Fun(d, c))
                e1 = _meet(R.lift_simple(s2), dom_t)
                e2 = _meet(R.lift_simple(s), fun_t)
                x, y = F.fresh_term_var(), F.fresh_term_var()
                out = tgt.Let(x, tgt.Asc(e1, av, dom_t),
                              tgt.Let(y, tgt.Asc(e2, fv, fun_t), tgt.App(tgt.Var(y), tgt.Var(x))))
                return out, c

            case src.Choice(a, p, b):
                ta, ga = self.term(env, a)
                tb, gb = self.term(env, b)
                q = psub(Fraction(1), p)
                w1, w2 = F.fresh_tagged_var(0, 0), F.fresh_tagged_var(0, 0)
                phi = F.conj(R.lift_prob(p, w1), R.lift_prob(q, w2),
                             F.eq(F.expr(w1) + F.expr(w2), 1))
                g = gsum(gscale(p, ga), gscale(q, gb))
                left = fsum(phi, [scale(w1, R.lift_dist(ga)), scale(w2, R.lift_dist(gb))])
                ty = R.lift_dist(g)
                ev = _meet(left, ty)
                return tgt.AscDist(ev, tgt.Choice(ta, phi, w1, w2, tb), ty, left), g

            case src.Let(x, a, b):
                ta, ga = self.term(env, a)
                bodies = []  # (entry type, target body, body type) per distinct entry type
                per_entry = []
                for s, _ in ga.entries:
                    for t, n, g in bodies:
                        if t == s:
                            break
                    else:
                        n, g = self.term({**env, x: s}, b)
                        bodies.append((s, n, g))
                    per_entry.append(g)
                g = gsum(*(gscale(p, gi) for (_, p), gi in zip(ga.entries, per_entry)))
                ws = [F.fresh_tagged_var(i, i) for i in range(1, len(ga.entries) + 1)]
                phi = F.conj(*(R.lift_prob(p, w) for (_, p), w in zip(ga.entries, ws)))
                left = fsum(phi, [scale(w, R.lift_dist(gi)) for w, gi in zip(ws, per_entry)])
                ty = R.lift_dist(g)
                ev = _meet(left, ty)
                if len(bodies) == 1:
                    inner = tgt.Let(x, ta, bodies[0][1])
                else:
                    inner = tgt.Let(x, ta, bodies[0][1],
                                    tuple((R.lift_simple(s), n) for s, n, _ in bodies))
                return tgt.AscDist(ev, inner, ty, left), g

            case src.AscDist(a, g2):
                ta, g = self.term(env, a)
                _require(lambda: R.wf_dist(g2), "ill-formed type",
                         "ascribed distribution type is not well-formed", m.span, (g2,))
                _require(lambda: R.consistent(g, g2), "inconsistency",
                         "term type does not match the ascription", m.span, (g, g2))
                ty = R.lift_dist(g2)
                ev = _meet(R.lift_dist(g), ty)
                return tgt.AscDist(ev, ta, ty), g2

            case src.AscSimple(v, s2):
                tv, s = self.value(env, v)
                _require(lambda: R.wf_simple(s2), "ill-formed type",
                         "ascribed type is not well-formed", m.span, (s2,))
                _require(lambda: R.consistent(s, s2), "inconsistency",
                         "value type does not match the ascription", m.span, (s, s2))
                ty = R.lift_simple(s2)
                return tgt.Asc(_meet(R.lift_simple(s), ty), tv, ty), dirac(s2)

            case src.Add(v, w):
                parts = []
                for operand in (v, w):
                    tv, s = self.value(env, operand)
                    _require(lambda: R.consistent(s, REAL), "inconsistency",
                             "operand of + is not a number", m.span, (s, REAL))
                    parts.append(tgt.Asc(_meet(R.lift_simple(s), REAL), tv, REAL))
                x, y = F.fresh_term_var(), F.fresh_term_var()
                out = tgt.Let(x, parts[0], tgt.Let(y, parts[1], tgt.Add(tgt.Var(x), tgt.Var(y))))
                return out, dirac(REAL)

            case src.If(c, a, b):
                tv, s = self.value(env, c)
                _require(lambda: R.consistent(s, BOOL), "inconsistency",
                         "condition is not a boolean", m.span, (s, BOOL))
                ta, ga = self.term(env, a)
                tb, gb = self.term(env, b)
                _require(lambda: R.reorder(ga, gb), "branch mismatch",
                         "branches have different types", m.span, (ga, gb))
                x = F.fresh_term_var()
                out = tgt.Let(x, tgt.Asc(_meet(R.lift_simple(s), BOOL), tv, BOOL),
                              tgt.If(tgt.Var(x), ta, tb))
                return out, ga
        raise TypeError(m)


def elaborate(m, env: Optional[Mapping[str, Simple]] = None) -> ElabOutput:
    """Elaborate a source term; raises `TypeCheckError` if it is ill-typed."""
    t, g = _Elaborator().term(dict(env or {}), m)
    return ElabOutput(t, g)


def elaborate_value(v, env: Optional[Mapping[str, Simple]] = None) -> ElabOutput:
    t, s = _Elaborator().value(dict(env or {}), v)
    return ElabOutput(t, s)
