"""Fuel-bounded big-step distribution semantics for TPLC.

Fuel counts derivation nodes: every rule application costs one unit.  The
walk is recursive, so `evaluate` runs it on a worker thread with a large
stack.
"""

from __future__ import annotations

import sys
import threading
from dataclasses import dataclass
from fractions import Fraction
from typing import Optional, Union

from . import formula as F
from . import relations as R
from . import solver as S
from . import target as tgt
from .checker import TypeCheckError, select_case, typecheck_tplc, value_type
from .formula import TaggedVar
from .gtypes import REAL, FDist, Fun, Undefined, canonical_simple, fcod, fdom

ONE = Fraction(1)
ZERO = Fraction(0)


@dataclass(frozen=True)
class DistValue:
    """φ ▷ {v_i^p_i}: final values with symbolic probabilities."""
    formula: F.Formula
    entries: tuple

    @property
    def values(self):
        return [v for v, _ in self.entries]

    @property
    def probs(self):
        return [p for _, p in self.entries]


def dirac(v) -> DistValue:
    return DistValue(F.TRUE, ((v, ONE),))


def error_dist(ty: FDist) -> DistValue:
    """(Derr): one simple error per entry of the distribution type."""
    return close(DistValue(ty.formula, tuple((tgt.ErrSimple(t), p) for t, p in ty.entries)))


# ----------------------------------------------------------------- outcomes


@dataclass(frozen=True)
class Converged:
    value: DistValue
    steps: int


@dataclass(frozen=True)
class FuelExhausted:
    fuel: int


@dataclass(frozen=True)
class Stuck:
    description: str


@dataclass(frozen=True)
class Undecided:
    reason: str
    query: str = ""


Outcome = Union[Converged, FuelExhausted, Stuck, Undecided]


class _OutOfFuel(Exception):
    pass


class _Stuck(Exception):
    pass


# --------------------------------------------------------------- combination


def _pinned(phi: F.Formula) -> dict:
    out = {}
    for a in F.atoms(phi):
        if isinstance(a, F.Eq):
            if isinstance(a.left, F.Var) and isinstance(a.right, F.Const):
                out[a.left.id] = a.right.value
            elif isinstance(a.right, F.Var) and isinstance(a.left, F.Const):
                out[a.right.id] = a.left.value
    return out


def _resolve(p, pins: dict):
    if isinstance(p, TaggedVar) and p.id in pins:
        return pins[p.id]
    return p


def combine(weights, parts, extra: F.Formula = F.TRUE) -> DistValue:
    """Σ_k weights[k] · parts[k] under extra ∧ ⋀ part formulas.

    Constant products are folded; otherwise a fresh variable is tied to the
    product by an equality and keeps the entry's tags (or its position).
    """
    formula = F.conj(extra, *(part.formula for part in parts))
    pins = _pinned(formula)
    entries = []
    eqs = []
    for w, part in zip(weights, parts):
        w = _resolve(w, pins)
        for v, q in part.entries:
            q = _resolve(q, pins)
            if isinstance(w, Fraction) and isinstance(q, Fraction):
                entries.append((v, w * q))
                continue
            pos = len(entries) + 1
            left = q.left if isinstance(q, TaggedVar) else pos
            right = q.right if isinstance(q, TaggedVar) else pos
            x = F.fresh_tagged_var(left, right)
            if w == ONE:
                rhs = F.expr(q)
            elif q == ONE:
                rhs = F.expr(w)
            else:
                rhs = F.Mul(F.expr(w), F.expr(q))
            eqs.append(F.eq(x, rhs))
            entries.append((v, x))
    return close(DistValue(F.conj(formula, *eqs), tuple(entries)))


def close(d: DistValue) -> DistValue:
    """Project the closing formula onto the entry variables; fold pinned entries."""
    names = [p.id for p in d.probs if isinstance(p, TaggedVar)]
    phi, pins = S.project(d.formula, names)
    entries = tuple((v, pins.get(p.id, p) if isinstance(p, TaggedVar) else p)
                    for v, p in d.entries)
    return DistValue(phi, entries)


def _value_key(v):
    if isinstance(v, tgt.ErrSimple):
        return ("err", canonical_simple(v.ty))
    return (canonical_simple(v.ev), v.value, canonical_simple(v.ty))


def merge_identical(d: DistValue) -> DistValue:
    """Merge entries holding the same value under the same evidence and type,
    and tag every probability variable with its entry position."""
    groups: dict = {}
    for v, p in d.entries:
        groups.setdefault(_value_key(v), (v, []))[1].append(p)
    eqs = []
    entries = []
    for pos, (v, ps) in enumerate(groups.values(), start=1):
        if all(isinstance(p, Fraction) for p in ps):
            p = sum(ps, ZERO)
        elif len(ps) == 1:
            p = TaggedVar(ps[0].id, pos, pos)
        else:
            p = F.fresh_tagged_var(pos, pos)
            eqs.append(F.eq(p, F.total(ps)))
        entries.append((v, p))
    if not eqs and len(entries) == len(d.entries):
        return DistValue(d.formula, tuple(entries))
    return close(DistValue(F.conj(d.formula, *eqs), tuple(entries)))


def _rename_dist(t: FDist, names: dict) -> FDist:
    entries = tuple((ty, TaggedVar(names.get(p.id, p.id), p.left, p.right)
                     if isinstance(p, TaggedVar) else p) for ty, p in t.entries)
    return FDist(F.rename(t.formula, names), entries)


def _freshen(*types: FDist):
    """Rename the top-level formula variables of several types jointly."""
    names = {}
    for t in types:
        for x in F.free_vars(t.formula) | {p.id for p in t.probs if isinstance(p, TaggedVar)}:
            if x not in names:
                names[x] = F.fresh_name()
    return tuple(_rename_dist(t, names) for t in types)


# ----------------------------------------------------------------- evaluator


class _Machine:
    def __init__(self, fuel: int):
        self.fuel = fuel
        self.steps = 0

    def tick(self):
        self.steps += 1
        if self.steps > self.fuel:
            raise _OutOfFuel()

    # (D::σ) on a final value; returns a final value
    def cast(self, ev, v, ty):
        if isinstance(v, tgt.ErrSimple):
            return tgt.ErrSimple(ty)
        if not (isinstance(v, tgt.Asc) and isinstance(v.value, tgt.Raw)):
            raise _Stuck(f"cannot ascribe {type(v).__name__}")
        try:
            ev3 = R.meet(v.ev, ev)
        except Undefined:
            return tgt.ErrSimple(ty)
        return tgt.Asc(ev3, v.value, ty)

    def final(self, v):
        """Reduce a value-position term (possibly a nested ascription) to a final value."""
        if tgt.is_final(v):
            return v
        if isinstance(v, tgt.Asc):
            return self.cast(v.ev, self.final(v.value), v.ty)
        raise _Stuck(f"expected a closed value, found {type(v).__name__}")

    def sub(self, body, v, x: str, ty=None):
        """sub(m, v, x); an error value turns the whole body into err@T."""
        if isinstance(v, tgt.ErrSimple):
            if isinstance(body, tgt.AscDist):
                return tgt.ErrDist(body.ty)
            try:
                return tgt.ErrDist(typecheck_tplc(body, {x: v.ty}))
            except TypeCheckError as e:
                raise _Stuck(f"cannot type the body of a failed substitution: {e}")
        return tgt.substitute(body, x, v)

    def eval(self, m) -> DistValue:
        self.tick()
        match m:
            case tgt.ErrSimple():
                return dirac(m)
            case tgt.Asc(ev, inner, ty):
                if isinstance(inner, tgt.Raw):                           # (Dv)
                    return dirac(m)
                return dirac(self.cast(ev, self.final(inner), ty))        # (D::σ)
            case tgt.Var(x):
                raise _Stuck(f"free variable {x}")
            case tgt.ErrDist(ty):                                        # (Derr)
                return error_dist(ty)
            case tgt.App(f, a):                                          # (Dapp)
                f = self.final(f)
                a = self.final(a)
                if isinstance(f, tgt.ErrSimple):
                    if isinstance(f.ty, Fun):
                        return error_dist(f.ty.cod)
                    raise _Stuck("applying an error of non-function type")
                if not (isinstance(f, tgt.Asc) and isinstance(f.value, tgt.Lam)):
                    raise _Stuck("applying a non-function value")
                lam = f.value
                try:
                    d, c = fdom(f.ev), fcod(f.ev)
                    cod_ty = f.ty.cod
                except (Undefined, AttributeError):
                    raise _Stuck("function evidence is not a function type") from None
                self.tick()                                              # argument cast
                w = self.cast(d, a, lam.ty)
                body = tgt.AscDist(c, lam.body, cod_ty, lam.body_ty)
                return self.eval(self.sub(body, w, lam.param))
            case tgt.Choice(a, phi, p1, p2, b):                          # (D⊕)
                va = self.eval(a)
                vb = self.eval(b)
                return combine([p1, p2], [va, vb], phi)
            case tgt.Let(x, a, b, cases):                                # (Dlet)
                va = self.eval(a)
                parts = []
                for v, _ in va.entries:
                    body = select_case(cases, value_type(v), b)
                    parts.append(self.eval(self.sub(body, v, x)))
                return combine(va.probs, parts, va.formula)
            case tgt.Add(l, r):                                          # (D+)
                l, r = self.final(l), self.final(r)
                for v in (l, r):
                    if isinstance(v, tgt.ErrSimple):
                        return dirac(tgt.ErrSimple(REAL))
                if not all(isinstance(v, tgt.Asc) and isinstance(v.value, tgt.RealLit)
                           for v in (l, r)):
                    raise _Stuck("adding non-numbers")
                try:
                    ev3 = R.meet(l.ev, r.ev)
                except Undefined:
                    return dirac(tgt.ErrSimple(REAL))
                return dirac(tgt.Asc(ev3, tgt.RealLit(l.value.value + r.value.value), REAL))
            case tgt.If(c, a, b):                                        # (Dit) / (Dif)
                c = self.final(c)
                if isinstance(c, tgt.ErrSimple):
                    return error_dist(typecheck_tplc(a))
                if not (isinstance(c, tgt.Asc) and isinstance(c.value, tgt.BoolLit)):
                    raise _Stuck("branching on a non-boolean")
                return self.eval(a if c.value.value else b)
            case tgt.AscDist(ev, inner, ty, src):                        # (D::T̂)
                return self.ascribe(ev, inner, ty, src)
        raise _Stuck(f"unknown term {type(m).__name__}")

    def ascribe(self, ev: FDist, inner, ty: FDist, src: Optional[FDist]) -> DistValue:
        val = self.eval(inner)
        if src is None:
            try:
                src = typecheck_tplc(inner)
            except TypeCheckError as e:
                raise _Stuck(f"cannot type an ascribed term: {e}")
        ev, ty, src = _freshen(ev, ty, src)
        val = merge_identical(val)
        # (GV): the type of the value distribution
        vty = FDist(val.formula, tuple((value_type(v), p) for v, p in val.entries))
        try:
            start = R.init_reorder(vty, src)
            comp = R.meet(start, ev)
        except Undefined:
            return error_dist(ty)
        # cells with the same value, target entry and evidence push identically
        groups = {}
        for e_k, w_k in comp.entries:
            key = (w_k.left, w_k.right, canonical_simple(e_k))
            groups.setdefault(key, (e_k, []))[1].append(w_k)
        eqs = []
        cells = []
        for (i, j, _), (e_k, ws) in groups.items():
            if len(ws) == 1:
                w = ws[0]
            else:
                w = F.fresh_tagged_var(i, j)
                eqs.append(F.eq(w, F.total(ws)))
            cells.append((i, j, e_k, w))
        phi = F.conj(comp.formula, *eqs)
        pushed = []
        failed = []
        for i, j, e_k, w in cells:
            v = val.entries[i - 1][0]
            out = self.cast(e_k, v, ty.entries[j - 1][0])
            if isinstance(out, tgt.ErrSimple) and not isinstance(v, tgt.ErrSimple):
                failed.append(w)
            else:
                pushed.append((w, out))
        if failed:
            phi = F.conj(phi, *(F.eq(w, 0) for w in failed))
            if not R._exists(phi):
                return error_dist(ty)
        live = S.positive_possible(phi, [w.id for w, _ in pushed])
        keep = [(w, out) for w, out in pushed if live is None or w.id in live]
        if not keep:
            return error_dist(ty)
        return combine([w for w, _ in keep], [dirac(out) for _, out in keep], phi)


def run(m, fuel: int = 10000) -> Outcome:
    """Evaluate on the current thread."""
    machine = _Machine(fuel)
    try:
        v = machine.eval(m)
    except _OutOfFuel:
        return FuelExhausted(fuel)
    except _Stuck as e:
        return Stuck(str(e))
    except S.SolverUnknown as e:
        return Undecided(e.reason, e.query)
    return Converged(v, machine.steps)


_STACK = 512 * 1024 * 1024


def evaluate(m, fuel: int = 10000) -> Outcome:
    """Evaluate on a worker thread with a large stack, in the caller's context."""
    import contextvars
    ctx = contextvars.copy_context()
    box = []
    old_limit = sys.getrecursionlimit()
    sys.setrecursionlimit(max(old_limit, 1_000_000))
    old_size = threading.stack_size(_STACK)
    try:
        t = threading.Thread(target=lambda: box.append(ctx.run(run, m, fuel)))
        t.start()
        t.join()
    finally:
        threading.stack_size(old_size)
        sys.setrecursionlimit(old_limit)
    if not box:
        return Stuck("evaluation thread crashed")
    return box[0]


def has_error_mass(d: DistValue) -> bool:
    """Can some error entry carry positive probability?"""
    errs = [p for v, p in d.entries if isinstance(v, tgt.ErrSimple)]
    if not errs:
        return False
    consts = [p for p in errs if isinstance(p, Fraction)]
    if any(p > 0 for p in consts):
        return True
    names = [p.id for p in errs if isinstance(p, TaggedVar)]
    if not names:
        return False
    live = S.positive_possible(d.formula, names)
    return live is None or bool(live)
