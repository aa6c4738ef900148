"""Type checkers for SPLC (static), GPLC (gradual source) and TPLC (target)."""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Mapping, Optional, Tuple

from . import formula as F
from . import relations as R
from . import source as src
from . import target as tgt
from .gtypes import (BOOL, REAL, FDist, Fun, GDist, Simple, Undefined, UnknownProb,
                     alpha_eq, dirac, fdirac, fsum, gcod, gdom, gscale, gsum,
                     is_static_dist, is_static_simple, known_total_exceeds_one, psub,
                     scale, show_dist, show_simple)
from .solver import SolverUnknown

KINDS = ("inconsistency", "ill-formed type", "unbound var", "non-function application",
         "branch mismatch", "solver-unknown")


@dataclass(frozen=True)
class Diagnostic:
    kind: str
    message: str
    span: Optional[src.Span] = None
    types: Tuple[str, ...] = ()
    query: Optional[str] = None

    def __str__(self) -> str:
        where = f"{self.span}: " if self.span else ""
        return f"{where}{self.kind}: {self.message}"

    def as_dict(self) -> dict:
        return {"kind": self.kind, "message": self.message,
                "span": str(self.span) if self.span else None,
                "types": list(self.types)}


class TypeCheckError(Exception):
    def __init__(self, diagnostic: Diagnostic):
        super().__init__(str(diagnostic))
        self.diagnostic = diagnostic


def _show(t) -> str:
    return show_dist(t) if isinstance(t, (GDist, FDist)) else show_simple(t)


def _fail(kind, message, span=None, types=(), query=None):
    raise TypeCheckError(Diagnostic(kind, message, span, tuple(_show(t) for t in types), query))


def _require(holds, kind, message, span=None, types=()):
    """Evaluate a relation thunk; turn False / Unknown into a diagnostic."""
    try:
        ok = holds()
    except SolverUnknown as e:
        _fail("solver-unknown", f"{message} (solver: {e.reason})", span, types, e.query)
    if not ok:
        _fail(kind, message, span, types)


# ------------------------------------------------------------- source checker


class _SourceChecker:
    """Shared walk for SPLC and GPLC; `static` selects the relations."""

    def __init__(self, static: bool):
        self.static = static

    # relations
    def related(self, a, b) -> bool:
        if self.static:
            return R.static_eq(a, b)
        return R.consistent(a, b)

    def wf(self, t) -> bool:
        if self.static:
            if isinstance(t, GDist):
                return (is_static_dist(t) and bool(t.entries)
                        and sum(t.probs, Fraction(0)) == 1
                        and all(self.wf(s) for s in t.types))
            return is_static_simple(t) and (not isinstance(t, Fun)
                                            or (self.wf(t.dom) and self.wf(t.cod)))
        return R.well_formed(t)

    def dom(self, t):
        if self.static and not isinstance(t, Fun):
            raise Undefined("not a function")
        return gdom(t)

    def cod(self, t):
        if self.static and not isinstance(t, Fun):
            raise Undefined("not a function")
        return gcod(t)

    # judgments
    def value(self, env: Mapping[str, Simple], v) -> Simple:
        match v:
            case src.RealLit():
                return REAL
            case src.BoolLit():
                return BOOL
            case src.Var(x):
                if x not in env:
                    _fail("unbound var", f"unbound variable {x}", v.span)
                return env[x]
            case src.Lam(x, ty, body):
                _require(lambda: self.wf(ty), "ill-formed type",
                         "parameter annotation is not well-formed", v.span, (ty,))
                return Fun(ty, self.term({**env, x: ty}, body))
        raise TypeError(v)

    def term(self, env: Mapping[str, Simple], m) -> GDist:
        match m:
            case src.Var() | src.RealLit() | src.BoolLit() | src.Lam():
                return dirac(self.value(env, m))
            case src.App(v, w):
                s = self.value(env, v)
                s2 = self.value(env, w)
                try:
                    d = self.dom(s)
                except Undefined:
                    _fail("non-function application", "applying a value that is not a function",
                          m.span, (s,))
                _require(lambda: self.related(s2, d), "inconsistency",
                         "argument type does not match the domain", m.span, (s2, d))
                return self.cod(s)
            case src.Choice(a, p, b):
                g1 = self.term(env, a)
                g2 = self.term(env, b)
                out = gsum(gscale(p, g1), gscale(psub(Fraction(1), p), g2))
                return out
            case src.Let(x, a, b):
                g = self.term(env, a)
                parts = [gscale(p, self.term({**env, x: s}, b)) for s, p in g.entries]
                out = gsum(*parts)
                if known_total_exceeds_one(out):
                    _fail("ill-formed type", "let result probabilities exceed one", m.span, (out,))
                return out
            case src.AscDist(a, ty):
                g = self.term(env, a)
                _require(lambda: self.wf(ty), "ill-formed type",
                         "ascribed distribution type is not well-formed", m.span, (ty,))
                _require(lambda: self.related(g, ty), "inconsistency",
                         "term type does not match the ascription", m.span, (g, ty))
                return ty
            case src.AscSimple(v, ty):
                s = self.value(env, v)
                _require(lambda: self.wf(ty), "ill-formed type",
                         "ascribed type is not well-formed", m.span, (ty,))
                _require(lambda: self.related(s, ty), "inconsistency",
                         "value type does not match the ascription", m.span, (s, ty))
                return dirac(ty)
            case src.Add(v, w):
                for x in (v, w):
                    s = self.value(env, x)
                    _require(lambda: self.related(s, REAL), "inconsistency",
                             "operand of + is not a number", m.span, (s, REAL))
                return dirac(REAL)
            case src.If(c, a, b):
                s = self.value(env, c)
                _require(lambda: self.related(s, BOOL), "inconsistency",
                         "condition is not a boolean", m.span, (s, BOOL))
                g1 = self.term(env, a)
                g2 = self.term(env, b)
                same = R.static_eq if self.static else R.reorder
                _require(lambda: same(g1, g2), "branch mismatch",
                         "branches have different types", m.span, (g1, g2))
                return g1
        raise TypeError(m)


def typecheck_gplc(m, env: Optional[Mapping[str, Simple]] = None) -> GDist:
    return _SourceChecker(False).term(dict(env or {}), m)


def typeof_value_gplc(v, env: Optional[Mapping[str, Simple]] = None) -> Simple:
    return _SourceChecker(False).value(dict(env or {}), v)


def typecheck_splc(m, env: Optional[Mapping[str, Simple]] = None) -> GDist:
    if not is_static_term(m):
        _fail("ill-formed type", "program is not fully static", getattr(m, "span", None))
    return _SourceChecker(True).term(dict(env or {}), m)


def is_static_term(m) -> bool:
    match m:
        case src.Var() | src.RealLit() | src.BoolLit():
            return True
        case src.Lam(_, ty, body):
            return is_static_simple(ty) and is_static_term(body)
        case src.App(a, b) | src.Add(a, b) | src.Let(_, a, b):
            return is_static_term(a) and is_static_term(b)
        case src.Choice(a, p, b):
            return not isinstance(p, UnknownProb) and is_static_term(a) and is_static_term(b)
        case src.AscSimple(v, ty):
            return is_static_simple(ty) and is_static_term(v)
        case src.AscDist(t, ty):
            return is_static_dist(ty) and is_static_term(t)
        case src.If(c, a, b):
            return is_static_term(c) and is_static_term(a) and is_static_term(b)
    raise TypeError(m)


# ------------------------------------------------------------- target checker


def raw_type(env, u) -> Simple:
    match u:
        case tgt.RealLit():
            return REAL
        case tgt.BoolLit():
            return BOOL
        case tgt.Lam(x, ty, body, _):
            _require(lambda: R.wf_simple(ty), "ill-formed type",
                     "parameter annotation is not well-formed", None, (ty,))
            return Fun(ty, typecheck_tplc(body, {**env, x: ty}))
    raise TypeError(u)


def _same_simple(a: Simple, b: Simple) -> bool:
    return a == b or alpha_eq(a, b) or R.reorder_simple(a, b)


def typeof_value_tplc(v, env: Optional[Mapping[str, Simple]] = None) -> Simple:
    env = dict(env or {})
    match v:
        case tgt.Var(x):
            if x not in env:
                _fail("unbound var", f"unbound variable {x}")
            return env[x]
        case tgt.ErrSimple(ty):
            _require(lambda: R.wf_simple(ty), "ill-formed type", "error type is not well-formed",
                     None, (ty,))
            return ty
        case tgt.Asc(ev, inner, ty):
            s = raw_type(env, inner) if isinstance(inner, tgt.Raw) else typeof_value_tplc(inner, env)
            _require(lambda: R.wf_simple(ty), "ill-formed type",
                     "ascribed type is not well-formed", None, (ty,))
            _require(lambda: R.evidence_valid(ev, s, ty), "inconsistency",
                     "evidence does not justify the ascription", None, (ev, s, ty))
            return ty
    raise TypeError(v)


def typecheck_tplc(m, env: Optional[Mapping[str, Simple]] = None) -> FDist:
    env = dict(env or {})
    match m:
        case tgt.Var() | tgt.ErrSimple() | tgt.Asc():
            return fdirac(typeof_value_tplc(m, env))
        case tgt.ErrDist(ty):
            _require(lambda: R.wf_dist(ty), "ill-formed type", "error type is not well-formed",
                     None, (ty,))
            return ty
        case tgt.App(v, w):
            s = typeof_value_tplc(v, env)
            s2 = typeof_value_tplc(w, env)
            if not isinstance(s, Fun):
                _fail("non-function application", "applying a value that is not a function",
                      None, (s,))
            _require(lambda: _same_simple(s2, s.dom), "inconsistency",
                     "argument type differs from the domain", None, (s2, s.dom))
            return s.cod
        case tgt.Let(x, a, b, cases):
            t = typecheck_tplc(a, env)
            parts = []
            for s, p in t.entries:
                body = select_case(cases, s, b)
                parts.append(scale(p, typecheck_tplc(body, {**env, x: s})))
            return fsum(t.formula, parts)
        case tgt.Choice(a, phi, p1, p2, b):
            t1 = typecheck_tplc(a, env)
            t2 = typecheck_tplc(b, env)
            _require(lambda: R._exists(F.conj(phi, F.eq(F.expr(p1) + F.expr(p2), 1))),
                     "ill-formed type", "choice probabilities cannot sum to one")
            return fsum(phi, [scale(p1, t1), scale(p2, t2)])
        case tgt.AscDist(ev, a, ty, _):
            t = typecheck_tplc(a, env)
            _require(lambda: R.wf_dist(ty), "ill-formed type",
                     "ascribed distribution type is not well-formed", None, (ty,))
            _require(lambda: R.evidence_valid(ev, t, ty), "inconsistency",
                     "evidence does not justify the ascription", None, (ev, t, ty))
            return ty
        case tgt.Add(v, w):
            for x in (v, w):
                s = typeof_value_tplc(x, env)
                if s != REAL:
                    _fail("inconsistency", "operand of + is not Real", None, (s,))
            return fdirac(REAL)
        case tgt.If(c, a, b):
            s = typeof_value_tplc(c, env)
            if s != BOOL:
                _fail("inconsistency", "condition is not Bool", None, (s,))
            t1 = typecheck_tplc(a, env)
            t2 = typecheck_tplc(b, env)
            _require(lambda: R.reorder_dist(t1, t2), "branch mismatch",
                     "branches have different types", None, (t1, t2))
            return t1
    raise TypeError(m)


def select_case(cases, s: Simple, default):
    """The let body elaborated for entry type `s`."""
    if not cases:
        return default
    for t, body in cases:
        if t == s or alpha_eq(t, s):
            return body
    for t, body in cases:
        try:
            if R.reorder_simple(t, s):
                return body
        except SolverUnknown:
            continue
    return cases[0][1]


def value_type(v) -> Simple:
    """Type of a final value, read off its ascription."""
    if isinstance(v, (tgt.Asc, tgt.ErrSimple)):
        return v.ty
    raise TypeError(v)


def typecheck_distvalue(phi: F.Formula, entries) -> FDist:
    """(GV): each value at its own type, probabilities unchanged."""
    return FDist(phi, tuple((typeof_value_tplc(v), p) for v, p in entries))
