"""Term precision for GPLC and TPLC, and precision of distribution values."""

from __future__ import annotations

from fractions import Fraction
from typing import Mapping, Optional

from . import formula as F
from . import relations as R
from . import solver as S
from . import source as src
from . import target as tgt
from .checker import TypeCheckError, typecheck_tplc, typeof_value_tplc, value_type
from .formula import TaggedVar
from .gtypes import UnknownProb, canonical_simple


def _prob_le(p, q) -> bool:
    return isinstance(q, UnknownProb) or p == q


# ------------------------------------------------------------------- source


def source_precise(m, n) -> bool:
    """m ⊑ n on GPLC terms: same shape, each annotation at least as precise."""
    match m, n:
        case src.Var(x), src.Var(y):
            return x == y
        case src.RealLit(a), src.RealLit(b):
            return a == b
        case src.BoolLit(a), src.BoolLit(b):
            return a == b
        case src.Lam(x, s, a), src.Lam(y, t, b):
            return x == y and R.precise(s, t) and source_precise(a, b)
        case (src.AscSimple(a, s), src.AscSimple(b, t)) | (src.AscDist(a, s), src.AscDist(b, t)):
            return R.precise(s, t) and source_precise(a, b)
        case src.Choice(a, p, b), src.Choice(c, q, d):
            return _prob_le(p, q) and source_precise(a, c) and source_precise(b, d)
        case (src.App(a, b), src.App(c, d)) | (src.Add(a, b), src.Add(c, d)):
            return source_precise(a, c) and source_precise(b, d)
        case src.Let(x, a, b), src.Let(y, c, d):
            return x == y and source_precise(a, c) and source_precise(b, d)
        case src.If(c, a, b), src.If(c2, a2, b2):
            return source_precise(c, c2) and source_precise(a, a2) and source_precise(b, b2)
    return False


# ------------------------------------------------------------------- target


def _entails(phi1: F.Formula, phi2: F.Formula) -> bool:
    """∀FV(φ1). φ1 ⟹ ∃(rest). φ2."""
    u = F.free_vars(phi1)
    return _decide(S.solve_forall_exists(u, phi1, F.free_vars(phi2) - u, phi2))


class _TargetPrecision:
    def err_below(self, ty, n, env) -> bool:
        """err@ty ⊑ n: n's type is less precise than ty."""
        try:
            if isinstance(n, (tgt.Var, tgt.Asc, tgt.ErrSimple)):
                return R.precise(ty, typeof_value_tplc(n, env))
            return R.precise(ty, typecheck_tplc(n, env))
        except TypeCheckError:
            return False

    def raw(self, u, v, env) -> bool:
        match u, v:
            case tgt.RealLit(a), tgt.RealLit(b):
                return a == b
            case tgt.BoolLit(a), tgt.BoolLit(b):
                return a == b
            case tgt.Lam(x, s, a, _), tgt.Lam(y, t, b, _):
                return x == y and R.precise(s, t) and self.term(a, b, {**env, y: t})
        return False

    def term(self, m, n, env: Mapping) -> bool:
        match m, n:
            case tgt.ErrSimple(ty), _:
                return self.err_below(ty, n, env)
            case tgt.ErrDist(ty), _:
                return self.err_below(ty, n, env)
            case tgt.Var(x), tgt.Var(y):
                return x == y
            case tgt.Asc(e1, u1, t1), tgt.Asc(e2, u2, t2):
                if not (R.precise(e1, e2) and R.precise(t1, t2)):
                    return False
                if isinstance(u1, tgt.Raw) and isinstance(u2, tgt.Raw):
                    return self.raw(u1, u2, env)
                if isinstance(u1, tgt.Raw) or isinstance(u2, tgt.Raw):
                    return False
                return self.term(u1, u2, env)
            case tgt.AscDist(e1, a, t1, _), tgt.AscDist(e2, b, t2, _):
                return R.precise(e1, e2) and R.precise(t1, t2) and self.term(a, b, env)
            case tgt.Choice(a, phi1, p1, q1, b), tgt.Choice(c, phi2, p2, q2, d):
                names = {p2.id: p1.id, q2.id: q1.id}
                return (self.term(a, c, env) and self.term(b, d, env)
                        and _entails(phi1, F.rename(phi2, names)))
            case (tgt.App(a, b), tgt.App(c, d)) | (tgt.Add(a, b), tgt.Add(c, d)):
                return self.term(a, c, env) and self.term(b, d, env)
            case tgt.If(c, a, b), tgt.If(c2, a2, b2):
                return self.term(c, c2, env) and self.term(a, a2, env) and self.term(b, b2, env)
            case tgt.Let(x, a, b, cs1), tgt.Let(y, c, d, cs2):
                if x != y or not self.term(a, c, env):
                    return False
                try:
                    bound = typecheck_tplc(c, env)
                except TypeCheckError:
                    return False
                left = cs1 or [(None, b)]
                right = cs2 or [(s, d) for s in bound.types]
                for s, body in left:
                    if not any((s is None or R.precise(s, t))
                               and self.term(body, body2, {**env, y: t})
                               for t, body2 in right):
                        return False
                return True
        return False


def target_precise(m, n, env: Optional[Mapping] = None) -> bool:
    """m ⊑ n on TPLC terms."""
    return _TargetPrecision().term(m, n, dict(env or {}))


# ------------------------------------------------------------------- values


def value_precise(v, w) -> bool:
    """v ⊑ w on final values; an error is below any value of a less precise type."""
    if isinstance(v, tgt.ErrSimple):
        return R.precise(v.ty, value_type(w))
    if isinstance(w, tgt.ErrSimple):
        return False
    return target_precise(v, w)


def _key(v):
    if isinstance(v, tgt.ErrSimple):
        return ("err", canonical_simple(v.ty))
    return (canonical_simple(v.ev), v.value, canonical_simple(v.ty))


def _merge(d, prefix: str):
    """Merge identical values, fold pinned totals and rename every variable
    with `prefix`; returns (formula, values, probabilities)."""
    groups: dict = {}
    for v, p in d.entries:
        groups.setdefault(_key(v), (v, []))[1].append(p)
    names = {x: prefix + x for x in F.free_vars(d.formula)}
    for p in d.probs:
        if isinstance(p, TaggedVar):
            names.setdefault(p.id, prefix + p.id)
    phi = F.rename(d.formula, names)
    values, probs, eqs = [], [], []
    for k, (v, ps) in enumerate(groups.values()):
        values.append(v)
        if all(isinstance(p, Fraction) for p in ps):
            probs.append(sum(ps, Fraction(0)))
            continue
        total = F.rename_expr(F.total(ps), names)
        rng = S.prob_range(phi, total)
        if rng is not None and rng[0] == rng[1]:
            probs.append(rng[0])
            continue
        g = TaggedVar(f"{prefix}g{k}", 0, 0)
        eqs.append(F.eq(g, total))
        probs.append(g)
    return F.conj(phi, *eqs), values, probs


def distvalue_precise(d1, d2) -> bool:
    """φ1 ▷ V1 ⊑ φ2 ▷ V2: every φ1-assignment admits a φ2-assignment and a
    coupling supported on precision-related value pairs.

    Identical values are merged first, so that pinned totals fold to
    constants before the universal side is reduced to extreme points.
    """
    phi1, v1, p1 = _merge(d1, "l.")
    phi2, v2, p2 = _merge(d2, "r.")
    allowed = {(i, j)
               for i, v in enumerate(v1, start=1)
               for j, w in enumerate(v2, start=1)
               if value_precise(v, w)}
    if not allowed:
        return False
    fast = S.forall_coupling(phi1, p1, p2, allowed, phi2)
    if fast is not None:
        return _decide(fast)
    coupling, _ = S.coupling_formula(p1, p2, allowed)
    concl = F.conj(coupling, phi2)
    u = F.free_vars(phi1)
    return _decide(S.solve_forall_exists(u, phi1, F.free_vars(concl) - u, concl))


def _decide(r) -> bool:
    if r.unknown:
        raise S.SolverUnknown(r.reason)
    return r.sat
