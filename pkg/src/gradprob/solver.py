"""Satisfiability of probability formulas over variables ranging in [0, 1].

The built-in procedure is exact:

* presolve pins variables fixed by single-variable equalities and eliminates
  one variable per remaining linear equality (Gaussian elimination);
* a purely linear residue is decided by exact simplex;
* a polynomial residue is handled by spatial branch and bound: McCormick
  relaxations refute boxes, and candidate pinnings of the nonlinear
  variables look for models.  Running out of budget yields `Unknown`.

Every `Sat` model is re-checked by exact evaluation of the original formula.
When an external SMT solver is configured it is consulted on `Unknown`.
"""

from __future__ import annotations

import contextlib
import contextvars
import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from . import formula as F
from . import linear as L
from .formula import TaggedVar
from .linear import ONE, ZERO

Constraint = Tuple[dict, str]  # (poly, kind) meaning poly = 0 / <= 0 / < 0


# ------------------------------------------------------------------ results


@dataclass(frozen=True)
class SolveResult:
    status: str  # "sat" | "unsat" | "unknown"
    model: Optional[Dict[str, Fraction]] = None
    reason: str = ""
    coupling: Optional[Dict[Tuple[int, int], Fraction]] = None

    @property
    def sat(self) -> bool:
        return self.status == "sat"

    @property
    def unsat(self) -> bool:
        return self.status == "unsat"

    @property
    def unknown(self) -> bool:
        return self.status == "unknown"

    def __str__(self) -> str:
        if self.unknown:
            return f"unknown ({self.reason})"
        return self.status


SAT = SolveResult("sat", {})
UNSAT = SolveResult("unsat")


def unknown(reason: str) -> SolveResult:
    return SolveResult("unknown", reason=reason)


class SolverUnknown(Exception):
    """Raised where a definite verdict is required but none was found."""

    def __init__(self, reason: str, query: Optional[str] = None):
        super().__init__(reason)
        self.reason = reason
        self.query = query


# ------------------------------------------------------------ configuration


@dataclass
class Stats:
    exists: int = 0
    forall_exists: int = 0
    sat: int = 0
    unsat: int = 0
    unknown: int = 0
    external: int = 0

    def record(self, r: SolveResult) -> SolveResult:
        setattr(self, r.status, getattr(self, r.status) + 1)
        return r

    def as_dict(self) -> dict:
        return dict(self.__dict__)


@dataclass
class Solver:
    backend: str = "builtin"  # "builtin" | "external"
    path: Optional[str] = None
    timeout_ms: int = 5000
    node_budget: int = 400
    face_budget: int = 4000
    stats: Stats = field(default_factory=Stats)
    transcript: Optional[List[str]] = None  # SMT-LIB text of every query, when recording

    @staticmethod
    def parse(setting: str, timeout_ms: int = 5000) -> "Solver":
        """`builtin` or `external:<path>`."""
        if setting == "builtin":
            return Solver(timeout_ms=timeout_ms)
        if setting.startswith("external:") and len(setting) > len("external:"):
            return Solver("external", setting[len("external:"):], timeout_ms)
        raise ValueError(f"unknown solver setting {setting!r}; expected builtin or external:<path>")


_current: contextvars.ContextVar[Solver] = contextvars.ContextVar("solver", default=Solver())


def current() -> Solver:
    return _current.get()


@contextlib.contextmanager
def using(solver: Solver):
    token = _current.set(solver)
    try:
        yield solver
    finally:
        _current.reset(token)


# -------------------------------------------------------------- translation


def to_constraints(phi: F.Formula) -> Tuple[List[Constraint], bool]:
    """Constraints plus a flag telling whether a division was cleared."""
    out: List[Constraint] = []
    divided = False
    for atom in F.atoms(phi):
        n1, d1 = L.from_expr(atom.left)
        n2, d2 = L.from_expr(atom.right)
        kind = {F.Eq: "eq", F.Leq: "le", F.Lt: "lt"}[type(atom)]
        if L.is_constant(d1) and L.is_constant(d2):
            c1, c2 = L.constant_of(d1), L.constant_of(d2)
            if c1 == 0 or c2 == 0:
                out.append((L.const(1), "eq"))  # division by zero: unsatisfiable
                continue
            out.append((L.add(L.scale(n1, 1 / c1), n2, -1 / c2), kind))
        elif kind == "eq":
            divided = True
            out.append((L.add(L.mul(n1, d2), L.mul(n2, d1), -ONE), kind))
        else:
            raise L.NonConstantDenominator("inequality with a symbolic denominator")
    return out, divided


def _holds_const(c: Fraction, kind: str) -> bool:
    return c == 0 if kind == "eq" else (c <= 0 if kind == "le" else c < 0)


# ------------------------------------------------------------------ presolve


@dataclass
class Presolved:
    unsat: bool
    pins: Dict[str, Fraction]
    elims: List[Tuple[str, dict]]
    cons: List[Constraint]
    variables: set  # every variable of the input

    def env(self) -> Dict[str, dict]:
        """Substitution expressing pinned and eliminated variables in free ones.

        An elimination may mention variables eliminated after it, so the
        expressions are resolved last to first.
        """
        out = {x: L.const(v) for x, v in self.pins.items()}
        for x, e in reversed(self.elims):
            out[x] = L.substitute(e, out)
        return out

    def free(self) -> set:
        done = set(self.pins) | {x for x, _ in self.elims}
        return self.variables - done

    def model(self, partial: Mapping[str, Fraction]) -> Dict[str, Fraction]:
        m = {x: ZERO for x in self.free()}
        m.update(partial)
        m.update(self.pins)
        for x, e in reversed(self.elims):
            m[x] = L.evaluate(e, m)
        return m


def _nonlinear_vars(cons: Iterable[Constraint]) -> set:
    return {x for p, _ in cons for m in p if len(m) > 1 for x in m}


def presolve(cons: List[Constraint]) -> Presolved:
    variables = set()
    for p, _ in cons:
        variables |= L.poly_vars(p)
    pins: Dict[str, Fraction] = {}
    elims: List[Tuple[str, dict]] = []
    work: List[Constraint] = []
    for p, k in cons:
        if L.is_constant(p):
            if not _holds_const(L.constant_of(p), k):
                return Presolved(True, pins, elims, [], variables)
        else:
            work.append((p, k))

    while True:
        pick = None
        for idx, (p, k) in enumerate(work):
            if k == "eq" and L.degree(p) == 1:
                coeffs, _ = L.linear_coeffs(p)
                if len(coeffs) == 1:
                    pick = idx
                    break
                if pick is None:
                    pick = idx
        if pick is None:
            break
        p, _ = work.pop(pick)
        coeffs, c = L.linear_coeffs(p)
        if len(coeffs) == 1:
            (x, a), = coeffs.items()
            val = -c / a
            if not (0 <= val <= 1):
                return Presolved(True, pins, elims, [], variables)
            pins[x] = val
            sub = {x: L.const(val)}
            extra: List[Constraint] = []
        else:
            nonlin = _nonlinear_vars(work)
            x = min(coeffs, key=lambda v: (v in nonlin, len(v), v))
            a = coeffs[x]
            e = L.scale(L.add(p, {(x,): a}, -ONE), -1 / a)
            elims.append((x, e))
            sub = {x: e}
            extra = [(L.scale(e, -ONE), "le"), (L.add(e, L.const(1), -ONE), "le")]
        nxt: List[Constraint] = []
        for q, k in itertools.chain(work, extra):
            q = L.substitute(q, sub)
            if L.is_constant(q):
                if not _holds_const(L.constant_of(q), k):
                    return Presolved(True, pins, elims, [], variables)
                continue
            nxt.append((q, k))
        work = _dedupe(nxt)
    return Presolved(False, pins, elims, work, variables)


def _dedupe(cons: List[Constraint]) -> List[Constraint]:
    seen = set()
    out = []
    for p, k in cons:
        key = (frozenset(p.items()), k)
        if key not in seen:
            seen.add(key)
            out.append((p, k))
    return out


# --------------------------------------------------------------- linear core


def _split(cons: Iterable[Constraint]):
    eqs, les, lts = [], [], []
    for p, k in cons:
        coeffs, c = L.linear_coeffs(p)
        row = (coeffs, -c)
        (eqs if k == "eq" else les if k == "le" else lts).append(row)
    return eqs, les, lts


def _linear_feasible(cons: List[Constraint], variables: Iterable[str],
                     bounds: Optional[Mapping[str, Tuple[Fraction, Fraction]]] = None,
                     extra_upper: Optional[Mapping[str, Fraction]] = None):
    """Model dict, or None when infeasible."""
    names = sorted(set(variables) | {x for p, _ in cons for x in L.poly_vars(p)})
    eqs, les, lts = _split(cons)
    upper = dict(extra_upper or {})
    if bounds:
        for x, (lo, hi) in bounds.items():
            if x in upper or x in names:
                upper[x] = hi
                if lo > 0:
                    les.append(({x: -ONE}, -lo))
    if not lts:
        r = L.lp(names, {}, eqs, les, upper)
        return r.point if r.feasible else None
    t = "$t"
    les = les + [({**coeffs, t: ONE}, b) for coeffs, b in lts]
    r = L.lp(names + [t], {t: ONE}, eqs, les, upper)
    if not r.feasible or r.value <= 0:
        return None
    point = dict(r.point)
    point.pop(t)
    return point


# ------------------------------------------------------------ nonlinear core


def _mccormick(cons: List[Constraint], box: Mapping[str, Tuple[Fraction, Fraction]]):
    """Linear relaxation of `cons` over `box`; returns (cons, upper, aux map)."""
    aux: Dict[tuple, str] = {}
    aux_bounds: Dict[str, Tuple[Fraction, Fraction]] = {}
    rows: List[Constraint] = []

    def bnd(v: str):
        return aux_bounds[v] if v in aux_bounds else box.get(v, (ZERO, ONE))

    def lin(mono: tuple) -> str:
        if len(mono) == 1:
            return mono[0]
        if mono in aux:
            return aux[mono]
        x = lin(mono[:-1])
        y = mono[-1]
        (lx, ux), (ly, uy) = bnd(x), bnd(y)
        m = f"$m{len(aux)}"
        aux[mono] = m
        corners = [lx * ly, lx * uy, ux * ly, ux * uy]
        aux_bounds[m] = (min(corners), max(corners))
        X, Y, M = L.var(x), L.var(y), L.var(m)
        # m >= lx*y + ly*x - lx*ly ; m >= ux*y + uy*x - ux*uy
        rows.append((L.add(L.add(L.add(L.scale(Y, lx), L.scale(X, ly)), L.const(-lx * ly)), M, -ONE), "le"))
        rows.append((L.add(L.add(L.add(L.scale(Y, ux), L.scale(X, uy)), L.const(-ux * uy)), M, -ONE), "le"))
        # m <= ux*y + ly*x - ux*ly ; m <= lx*y + uy*x - lx*uy
        rows.append((L.add(M, L.add(L.add(L.scale(Y, ux), L.scale(X, ly)), L.const(-ux * ly)), -ONE), "le"))
        rows.append((L.add(M, L.add(L.add(L.scale(Y, lx), L.scale(X, uy)), L.const(-lx * uy)), -ONE), "le"))
        return m

    for p, k in cons:
        q: dict = {}
        for mono, c in p.items():
            if len(mono) <= 1:
                q = L.add(q, {mono: c})
            else:
                q = L.add(q, {(lin(mono),): c})
        rows.append((q, k))
    bounds = dict(box)
    bounds.update(aux_bounds)
    return rows, bounds, aux


_FAREY = sorted({Fraction(a, b) for b in range(1, 13) for a in range(0, b + 1)})


def simplest_between(lo: Fraction, hi: Fraction) -> Fraction:
    """The rational with the smallest denominator in the closed interval [lo, hi]."""
    if lo > hi:
        lo, hi = hi, lo
    fl = lo.numerator // lo.denominator
    if Fraction(fl) == lo:
        return lo
    if fl + 1 <= hi:
        return Fraction(fl + 1)
    # lo and hi share the integer part: recurse on reciprocals of the fractional parts
    inner = simplest_between(1 / (hi - fl), 1 / (lo - fl))
    return fl + 1 / inner


def _candidates(lo: Fraction, hi: Fraction, hint: Optional[Fraction]) -> List[Fraction]:
    out: List[Fraction] = []
    if hint is not None and hint.denominator > 64 and lo <= hint <= hi:
        w = (hi - lo) / 16
        hint = simplest_between(max(lo, hint - w), min(hi, hint + w))
    for v in [hint, lo, hi, (lo + hi) / 2]:
        if v is not None and lo <= v <= hi and v not in out:
            out.append(v)
    near = [f for f in _FAREY if lo <= f <= hi and f not in out]
    if hint is not None:
        near.sort(key=lambda f: abs(f - hint))
    return out + near[:6]


def _solve_residue(cons: List[Constraint], variables: set, solver: Solver):
    """('sat', model) | ('unsat', None) | ('unknown', reason) for presolved constraints."""
    if all(L.degree(p) <= 1 for p, _ in cons):
        m = _linear_feasible(cons, variables)
        return ("sat", m) if m is not None else ("unsat", None)

    budget = [solver.node_budget]
    stack = [{}]
    while stack:
        box = stack.pop()
        budget[0] -= 1
        if budget[0] < 0:
            return ("unknown", "nonlinear search budget exhausted")
        rows, bounds, aux = _mccormick(cons, box)
        point = _linear_feasible(rows, variables | set(bounds), bounds)
        if point is None:
            continue
        found = _try_pins(cons, variables, box, point, budget)
        if found is not None:
            return ("sat", found)
        nl = sorted(_nonlinear_vars(cons))
        widths = [(box.get(x, (ZERO, ONE))[1] - box.get(x, (ZERO, ONE))[0], x) for x in nl]
        w, x = max(widths, key=lambda t: (t[0], t[1]))
        if w == 0:
            continue
        lo, hi = box.get(x, (ZERO, ONE))
        # split at a short rational so that box bounds stay small
        mid = point.get(x, (lo + hi) / 2)
        if not (lo + (hi - lo) / 8 < mid < hi - (hi - lo) / 8):
            mid = (lo + hi) / 2
        mid = simplest_between(lo + (hi - lo) / 4, hi - (hi - lo) / 4) if mid == (lo + hi) / 2 \
            else simplest_between((lo + mid) / 2, (mid + hi) / 2)
        left, right = dict(box), dict(box)
        left[x] = (lo, mid)
        right[x] = (mid, hi)
        stack.extend([right, left])
    return ("unsat", None)


def _try_pins(cons, variables, box, hint, budget, depth=0):
    """Depth-first pinning of nonlinear variables until the residue is linear."""
    if budget[0] < 0:
        return None
    nl = _nonlinear_vars(cons)
    if not nl:
        ps = presolve(cons)
        if ps.unsat:
            return None
        m = _linear_feasible(ps.cons, ps.free())
        return None if m is None else ps.model(m)
    counts: Dict[str, int] = {}
    for p, _ in cons:
        for mono in p:
            if len(mono) > 1:
                for x in mono:
                    counts[x] = counts.get(x, 0) + 1
    x = max(sorted(counts), key=lambda v: counts[v])
    lo, hi = box.get(x, (ZERO, ONE))
    tries = _candidates(lo, hi, hint.get(x)) if depth < 3 else _candidates(lo, hi, hint.get(x))[:3]
    for v in tries:
        budget[0] -= 1
        if budget[0] < 0:
            return None
        sub = {x: L.const(v)}
        pinned = [(L.substitute(p, sub), k) for p, k in cons]
        pinned = pinned + [(L.add(L.var(x), L.const(v), -ONE), "eq")]
        ps = presolve(pinned)
        if ps.unsat:
            continue
        rest = _try_pins(ps.cons, ps.free(), box, hint, budget, depth + 1)
        if rest is not None:
            return ps.model(rest)
    return None


# ------------------------------------------------------------------- exists


def _check_model(phi: F.Formula, model: Dict[str, Fraction], divided: bool) -> Optional[SolveResult]:
    full = {x: model.get(x, ZERO) for x in F.free_vars(phi)}
    if F.holds(phi, full):
        return SolveResult("sat", full)
    if divided:
        return unknown("model hits a zero denominator")
    raise AssertionError("solver produced a model that does not satisfy the formula")


def solve_exists(phi: F.Formula) -> SolveResult:
    """Is there an assignment in [0,1] making φ true?"""
    solver = current()
    solver.stats.exists += 1
    if solver.transcript is not None:
        from . import smtlib
        solver.transcript.append(smtlib.emit_exists(phi))
    r = _exists_builtin(phi, solver)
    if r.unknown and solver.backend == "external":
        from . import smtlib
        solver.stats.external += 1
        r = smtlib.run_external(smtlib.emit_exists(phi), solver)
        if r.sat and r.model:
            r = _check_model(phi, r.model, True) or r
    return solver.stats.record(r)


def _exists_builtin(phi: F.Formula, solver: Solver) -> SolveResult:
    try:
        cons, divided = to_constraints(phi)
    except L.NonConstantDenominator as e:
        return unknown(str(e))
    ps = presolve(cons)
    if ps.unsat:
        return UNSAT
    status, payload = _solve_residue(ps.cons, ps.free(), solver)
    if status == "unsat":
        return UNSAT
    if status == "unknown":
        return unknown(payload)
    return _check_model(phi, ps.model(payload), divided)


# -------------------------------------------------------------- optimisation


def prob_range(phi: F.Formula, e) -> Optional[Tuple[Fraction, Fraction]]:
    """Exact (min, max) of expression `e` under φ, or None if unavailable."""
    try:
        cons, _ = to_constraints(phi)
        num, den = L.from_expr(F.expr(e))
    except L.NonConstantDenominator:
        return None
    if not L.is_constant(den):
        return None
    target = L.scale(num, 1 / L.constant_of(den))
    ps = presolve(cons)
    if ps.unsat:
        return None
    target = L.substitute(target, ps.env())
    if L.is_constant(target):
        c = L.constant_of(target)
        if _exists_builtin(phi, current()).sat:
            return (c, c)
        return None
    if L.degree(target) > 1 or any(L.degree(p) > 1 for p, _ in ps.cons):
        return None
    coeffs, c = L.linear_coeffs(target)
    names = sorted(ps.free() | set(coeffs))
    eqs, les, lts = _split(ps.cons)
    les = les + lts  # closure: ranges are reported over the closed set
    hi = L.lp(names, coeffs, eqs, les, maximize=True)
    if not hi.feasible:
        return None
    lo = L.lp(names, coeffs, eqs, les, maximize=False)
    return (lo.value + c, hi.value + c)


def is_linear(phi: F.Formula) -> bool:
    try:
        cons, divided = to_constraints(phi)
    except L.NonConstantDenominator:
        return False
    return not divided and all(L.degree(p) <= 1 for p, _ in cons)


def fold_pins(phi: F.Formula) -> F.Formula:
    """Substitute every `x = c` atom into the rest of φ; an equivalent formula."""
    pins: Dict[str, F.Expr] = {}
    while True:
        parts = list(F.atoms(F.subst(phi, pins) if pins else phi))
        new = {}
        for a in parts:
            if isinstance(a, F.Eq):
                for x, c in ((a.left, a.right), (a.right, a.left)):
                    if isinstance(x, F.Var) and isinstance(c, F.Const) and x.id not in pins:
                        new[x.id] = c
        if not new:
            break
        pins.update(new)
    if not pins:
        return phi
    return F.conj(*(F.eq(F.Var(x), c) for x, c in pins.items()), F.subst(phi, pins))


def image_points(phi: F.Formula, exprs: Sequence) -> Optional[List[Tuple[Fraction, ...]]]:
    """Points of the image of φ's region under x ↦ (e_1, e_2) whose convex
    hull is the whole image; at most two linear expressions.

    Returns None outside the linear fragment or when φ is unsatisfiable.
    The 2-D case wraps the hull with one LP per discovered edge.
    """
    if not 1 <= len(exprs) <= 2:
        return None
    try:
        cons, divided = to_constraints(phi)
        polys = []
        for e in exprs:
            num, den = L.from_expr(F.expr(e))
            if not L.is_constant(den):
                return None
            polys.append(L.scale(num, 1 / L.constant_of(den)))
    except L.NonConstantDenominator:
        return None
    if divided:
        return None
    ps = presolve(cons)
    if ps.unsat or any(L.degree(p) > 1 for p, _ in ps.cons):
        return None
    env = ps.env()
    polys = [L.substitute(p, env) for p in polys]
    if any(L.degree(p) > 1 for p in polys):
        return None
    lin = [L.linear_coeffs(p) for p in polys]
    names = sorted(ps.free() | {x for c, _ in lin for x in c})
    eqs, les, lts = _split(ps.cons)
    les = les + lts

    def image(point):
        return tuple(L.evaluate(p, point) for p in polys)

    def best(direction, fixed=()):
        """Maximise Σ d_k e_k, then break ties along `fixed` directions."""
        extra = []
        for d in (direction, *fixed):
            obj: dict = {}
            const = ZERO
            for dk, (coeffs, c) in zip(d, lin):
                for x, a in coeffs.items():
                    obj[x] = obj.get(x, ZERO) + dk * a
                const += dk * c
            r = L.lp(names, obj, eqs + extra, les, maximize=True)
            if not r.feasible:
                return None
            extra = extra + [(obj, r.value)]
            point = r.point
        return image({**{x: ZERO for x in names}, **point})

    if len(polys) == 1:
        hi, lo = best((ONE,)), best((-ONE,))
        if hi is None or lo is None:
            return None
        return sorted({hi, lo})
    a = best((-ONE, ZERO), [(ZERO, -ONE)])
    b = best((ONE, ZERO), [(ZERO, ONE)])
    if a is None or b is None:
        return None
    found = {a, b}

    def wrap(u, v):
        # outward normal of the directed edge u -> v; each new point is the
        # image of a fresh vertex of the region, so the recursion is finite
        n = (v[1] - u[1], u[0] - v[0])
        if n == (ZERO, ZERO):
            return
        w = best(n)
        if w is None:
            return
        if n[0] * (w[0] - u[0]) + n[1] * (w[1] - u[1]) > 0:
            found.add(w)
            wrap(u, w)
            wrap(w, v)

    wrap(a, b)
    wrap(b, a)
    return sorted(found)


def forall_coupling(hyp: F.Formula, left: Sequence, right: Sequence,
                    allowed: Iterable[Tuple[int, int]], side: F.Formula = F.TRUE
                    ) -> Optional[SolveResult]:
    """∀FV(hyp). hyp ⟹ ∃ a coupling of `left` and `right` over `allowed`, with `side`.

    `right` and `side` must not mention FV(hyp).  Rows with the same allowed
    columns are merged first, which is exact because a merged flow can always
    be split back among rows that reach the same columns.  The feasible row
    totals form a convex set when the conclusion is linear, so it suffices
    to check the extreme points of the image of `hyp` under the row totals.
    Totals pinned by the linear atoms of `hyp` are replaced by constants;
    when every total is pinned the conclusion is a single existential query
    and may be nonlinear.  Returns None outside that fragment (more than
    three symbolic totals, or anything nonlinear otherwise).
    """
    allowed = set(allowed)
    hyp, side = fold_pins(hyp), fold_pins(side)
    universal = F.free_vars(hyp) | {p.id for p in left if isinstance(p, TaggedVar)}
    groups: Dict[frozenset, list] = {}
    for i, p in enumerate(left, start=1):
        groups.setdefault(frozenset(j for (a, j) in allowed if a == i), []).append(p)
    keys = list(groups)
    totals = [F.total(groups[k]) for k in keys]
    merged = {(k, j) for k, cols in enumerate(keys, start=1) for j in cols}
    # totals pinned by the linear part of hyp (a relaxation) are constants
    relaxed = F.conj(*(a for a in F.atoms(hyp) if is_linear(a)))
    for k, t in enumerate(totals):
        if F.expr_vars(t) & universal:
            rng = prob_range(relaxed, t)
            if rng is not None and rng[0] == rng[1]:
                totals[k] = F.Const(rng[0])
    free = [k for k, t in enumerate(totals) if F.expr_vars(t) & universal]
    if not free:
        concl, _ = coupling_formula(totals, right, merged)
        r = solve_exists(F.conj(concl, side))
        if r.sat or r.unknown:
            return None if r.unknown else _record_forall(hyp, left, right, allowed, side, r)
        inhabited = _exists_builtin(hyp, current())
        if inhabited.unknown:
            return None
        return _record_forall(hyp, left, right, allowed, side,
                              SAT if inhabited.unsat else r)
    sym, _ = coupling_formula(totals, right, merged)
    if not is_linear(F.conj(sym, side, hyp)):
        return None
    if len(free) > 3:
        return None
    inhabited = _exists_builtin(hyp, current())
    if inhabited.unknown:
        return None
    if inhabited.unsat:
        return _record_forall(hyp, left, right, allowed, side, SAT)
    points: List[Tuple[Fraction, ...]] = [()]
    if len(free) == 3:
        rng = prob_range(hyp, F.total(totals[k] for k in free))
        if rng is None or rng[0] != rng[1]:
            return None
        pts = image_points(hyp, [totals[k] for k in free[:2]])
        points = None if pts is None else [(a, b, rng[0] - a - b) for a, b in pts]
    elif free:
        points = image_points(hyp, [totals[k] for k in free])
    if points is None:
        return None
    for pt in points:
        values = {k: c for k, c in zip(free, pt)}
        marginals = [F.Const(values[k]) if k in values else t for k, t in enumerate(totals)]
        concl, _ = coupling_formula(marginals, right, merged)
        r = solve_exists(F.conj(concl, side))
        if not r.sat:
            return _record_forall(hyp, left, right, allowed, side, r)
    return _record_forall(hyp, left, right, allowed, side, SAT)


def _record_forall(hyp, left, right, allowed, side, r: SolveResult) -> SolveResult:
    solver = current()
    solver.stats.forall_exists += 1
    if solver.transcript is not None:
        from . import smtlib
        concl, _ = coupling_formula(left, right, allowed)
        concl = F.conj(concl, side)
        universal = F.free_vars(hyp)
        solver.transcript.append(smtlib.emit_forall_exists(
            universal, hyp, F.free_vars(concl) - universal, concl))
    return solver.stats.record(SolveResult(r.status, None, r.reason))


def positive_possible(phi: F.Formula, variables: Sequence[str]) -> Optional[set]:
    """Subset of `variables` that can be positive under φ; None if undecided."""
    try:
        cons, _ = to_constraints(phi)
    except L.NonConstantDenominator:
        return None
    ps = presolve(cons)
    if ps.unsat:
        return set()
    env = ps.env()
    exprs = {}
    for v in variables:
        exprs[v] = L.substitute(L.var(v), env)
    if any(L.degree(p) > 1 for p, _ in ps.cons) or any(L.degree(e) > 1 for e in exprs.values()):
        return None
    out = set()
    todo = []
    for v, e in exprs.items():
        if L.is_constant(e):
            if L.constant_of(e) > 0:
                out.add(v)
        else:
            todo.append(v)
    eqs, les, lts = _split(ps.cons)
    les = les + lts
    names = sorted(ps.free() | {x for v in todo for x in L.poly_vars(exprs[v])})
    while todo:
        # maximise Σ t_v with t_v <= expr_v, t_v <= 1
        ts = {v: f"$t{i}" for i, v in enumerate(todo)}
        rows = list(les)
        for v in todo:
            coeffs, c = L.linear_coeffs(exprs[v])
            rows.append(({ts[v]: ONE, **{x: -a for x, a in coeffs.items()}}, c))
        r = L.lp(names + list(ts.values()), {t: ONE for t in ts.values()}, eqs, rows)
        if not r.feasible or r.value == 0:
            break
        hit = [v for v in todo if r.point[ts[v]] > 0]
        out.update(hit)
        todo = [v for v in todo if v not in hit]
    return out


def simplify(phi: F.Formula, keep: Iterable[str]) -> F.Formula:
    """Substitute pinned variables; keep `x = c` only for variables in `keep`."""
    try:
        cons, _ = to_constraints(phi)
    except L.NonConstantDenominator:
        return phi
    ps = presolve(cons)
    if ps.unsat:
        return F.FALSE
    if not ps.pins:
        return phi
    sub = {x: F.Const(v) for x, v in ps.pins.items()}
    out = []
    keep = set(keep)
    for x in sorted(ps.pins, key=_var_key):
        if x in keep:
            out.append(F.eq(F.Var(x), ps.pins[x]))
    for atom in F.atoms(phi):
        a = F.subst(atom, sub)
        if not F.free_vars(a):
            continue  # a constant truth, already validated by presolve
        out.append(_fold_atom(a))
    return F.conj(*out)


def _var_key(x: str):
    head = x.rstrip("0123456789")
    tail = x[len(head):]
    return (head, int(tail) if tail else -1)


def _fold_atom(a: F.Formula) -> F.Formula:
    """Constant-fold an atom's sides into sums of simple monomials."""
    try:
        n1, d1 = L.from_expr(a.left)
        n2, d2 = L.from_expr(a.right)
    except Exception:
        return a
    if not (L.is_constant(d1) and L.is_constant(d2)):
        return a
    p = L.add(L.scale(n1, 1 / L.constant_of(d1)), L.scale(n2, 1 / L.constant_of(d2)), -ONE)
    return _poly_atom(p, type(a))


def _poly_atom(p: dict, kind) -> F.Formula:
    """The atom `p ⋈ 0` written as lhs ⋈ rhs with non-negative coefficients."""
    lhs, rhs = [], []
    c = L.constant_of(p)
    for mono, k in sorted(p.items(), key=lambda t: (len(t[0]), [_var_key(v) for v in t[0]])):
        if mono == ():
            continue
        term = None
        for v in mono:
            term = F.Var(v) if term is None else F.Mul(term, F.Var(v))
        (lhs if k > 0 else rhs).append(term if abs(k) == 1 else F.Mul(F.Const(abs(k)), term))
    if c < 0:
        rhs.append(F.Const(-c))
    elif c > 0:
        lhs.append(F.Const(c))
    return kind(F.total(lhs), F.total(rhs))


_KIND = {"eq": F.Eq, "le": F.Leq, "lt": F.Lt}


def project(phi: F.Formula, keep: Iterable[str]) -> Tuple[F.Formula, Dict[str, Fraction]]:
    """Exact existential projection of φ onto the variables `keep`.

    Pinned and eliminated variables are substituted away, and constraint
    components unrelated to `keep` are dropped once shown satisfiable.
    Returns the projected formula and the constant values of pinned kept
    variables.  Formulas with symbolic denominators are returned unchanged.
    """
    keep = set(keep)
    try:
        cons, divided = to_constraints(phi)
    except L.NonConstantDenominator:
        return phi, {}
    if divided:
        return phi, {}
    ps = presolve(cons)
    if ps.unsat:
        return F.FALSE, {}
    resolved: Dict[str, dict] = {x: L.const(v) for x, v in ps.pins.items()}
    for x, e in reversed(ps.elims):
        resolved[x] = L.substitute(e, resolved)
    pins = {}
    defs = []
    seeds = set()
    for x in sorted(keep, key=_var_key):
        if x in resolved:
            e = resolved[x]
            if L.is_constant(e):
                pins[x] = L.constant_of(e)
            seeds |= L.poly_vars(e)
            defs.append(_poly_atom(L.add(L.var(x), e, -ONE), F.Eq))
        elif x in ps.variables:
            seeds.add(x)
    comp, _ = _components(ps.cons, seeds)
    rest = [c for c in ps.cons if c not in comp]
    if rest:
        status, _ = _solve_residue(rest, set(), current())
        if status == "unsat":
            return F.FALSE, {}
        if status == "unknown":
            comp = ps.cons
    atoms = defs + [_poly_atom(p, _KIND[k]) for p, k in comp]
    return F.conj(*atoms), pins


# ------------------------------------------------------------- forall/exists


def _components(cons: List[Constraint], seeds: set) -> Tuple[List[Constraint], set]:
    """Constraints (and their variables) connected to `seeds`."""
    reach = set(seeds)
    picked = [False] * len(cons)
    changed = True
    while changed:
        changed = False
        for i, (p, _) in enumerate(cons):
            if not picked[i] and L.poly_vars(p) & reach:
                picked[i] = True
                reach |= L.poly_vars(p)
                changed = True
    return [c for c, ok in zip(cons, picked) if ok], reach


class _FaceBudget(Exception):
    pass


def vertices(rows: List[Tuple[Dict[str, Fraction], Fraction]], names: Sequence[str],
             budget: int = 4000) -> Optional[List[Dict[str, Fraction]]]:
    """Vertices of {x ∈ [0,1]^n | a·x <= b for each row}, by face recursion.

    Returns None when the face budget is exhausted.
    """
    names = list(names)
    allrows = list(rows)
    for x in names:
        allrows.append(({x: ONE}, ONE))
        allrows.append(({x: -ONE}, ZERO))
    n = len(names)
    seen = set()
    found: Dict[tuple, Dict[str, Fraction]] = {}
    count = [0]

    def implicit(tight: frozenset) -> Optional[frozenset]:
        eqs = [allrows[i] for i in tight]
        todo = [i for i in range(len(allrows)) if i not in tight]
        # feasibility first
        r = L.lp(names, {}, eqs, [allrows[i] for i in todo])
        if not r.feasible:
            return None
        while todo:
            ts = {i: f"$t{i}" for i in todo}
            les = [({**allrows[i][0], ts[i]: ONE}, allrows[i][1]) for i in todo]
            r = L.lp(names + list(ts.values()), {t: ONE for t in ts.values()}, eqs, les)
            if r.value == 0:
                break
            todo = [i for i in todo if r.point[ts[i]] == 0]
        return tight | frozenset(todo)

    def visit(tight: frozenset):
        if tight in seen:
            return
        seen.add(tight)
        count[0] += 1
        if count[0] > budget:
            raise _FaceBudget
        full = implicit(tight)
        if full is None:
            return
        if full != tight:
            if full in seen:
                return
            seen.add(full)
        if L.rank([allrows[i][0] for i in full]) >= n:
            r = L.lp(names, {}, [allrows[i] for i in full], [])
            key = tuple(r.point[x] for x in names)
            found.setdefault(key, dict(r.point))
            return
        for i in range(len(allrows)):
            if i not in full:
                visit(full | {i})

    try:
        visit(frozenset())
    except _FaceBudget:
        return None
    return list(found.values())


def solve_forall_exists(universal: Iterable[str], hypothesis: F.Formula,
                        existential: Iterable[str], conclusion: F.Formula) -> SolveResult:
    """∀ universal. hypothesis ⟹ ∃ existential. conclusion.

    Free variables of the conclusion that are not universal count as
    existential.  A failing `Sat`/`Unsat` verdict is exact; `Unknown` is
    returned when the hypothesis region is not a polytope the procedure can
    cover.
    """
    solver = current()
    solver.stats.forall_exists += 1
    universal = set(universal)
    if solver.transcript is not None:
        from . import smtlib
        ex = (set(existential) | F.free_vars(conclusion)) - universal
        solver.transcript.append(smtlib.emit_forall_exists(universal, hypothesis, ex, conclusion))
    r = _forall_exists_builtin(universal, hypothesis, conclusion, solver)
    if r.unknown and solver.backend == "external":
        from . import smtlib
        solver.stats.external += 1
        existential = (set(existential) | F.free_vars(conclusion)) - universal
        r = smtlib.run_external(
            smtlib.emit_forall_exists(universal, hypothesis, existential, conclusion), solver)
        r = SolveResult(r.status, None, r.reason)
    return solver.stats.record(r)


def _forall_exists_builtin(universal: set, hyp: F.Formula, concl: F.Formula,
                           solver: Solver) -> SolveResult:
    if not universal & F.free_vars(concl):
        # the conclusion does not depend on the universals
        if _exists_builtin(hyp, solver).unsat:
            return SAT
        return _exists_builtin(concl, solver)
    try:
        hcons, _ = to_constraints(hyp)
        ccons, cdiv = to_constraints(concl)
    except L.NonConstantDenominator as e:
        return unknown(str(e))
    hp = presolve(hcons)
    if hp.unsat:
        return SAT
    # any universal not mentioned by the hypothesis ranges over all of [0,1]
    henv = {x: e for x, e in hp.env().items() if x in universal}
    ccons = [(L.substitute(p, henv), k) for p, k in ccons]
    ccons = _presolve_existential(ccons, universal)
    if ccons is None:
        return _forall_fails(hp, solver)
    cvars = {x for p, _ in ccons for x in L.poly_vars(p)}
    hfree = hp.free() | (universal - hp.variables)
    seeds = cvars & hfree & universal
    comp, comp_vars = _components(hp.cons, seeds)
    other = [c for c in hp.cons if c not in comp]
    if other:
        status, _ = _solve_residue(other, set(), solver)
        if status == "unsat":
            return SAT
        if status == "unknown":
            return unknown("hypothesis feasibility undecided")
    if not seeds:
        status, _ = _solve_residue(comp, comp_vars, solver)
        if status == "unsat":
            return SAT
        if status == "unknown":
            return unknown("hypothesis feasibility undecided")
        return _exists_cons(ccons, solver)

    comp_vars = comp_vars | seeds
    names = sorted(comp_vars, key=_var_key)
    hyp_linear = all(L.degree(p) <= 1 for p, _ in comp)
    concl_linear = all(L.degree(p) <= 1 for p, _ in ccons)
    if hyp_linear:
        rows = []
        for p, k in comp:
            coeffs, c = L.linear_coeffs(p)
            rows.append((coeffs, -c))
            if k == "eq":
                rows.append(({x: -a for x, a in coeffs.items()}, c))
        region = vertices(rows, names, solver.face_budget)
        exact = lambda v: True
    else:
        relaxed, bounds, aux = _mccormick(comp, {})
        rows = []
        for p, k in relaxed:
            coeffs, c = L.linear_coeffs(p)
            rows.append((coeffs, -c))
            if k == "eq":
                rows.append(({x: -a for x, a in coeffs.items()}, c))
        aux_names = sorted(set(aux.values()))
        region = vertices(rows, names + aux_names, solver.face_budget)
        comp_all = comp

        def exact(v):
            return all(_holds_const(L.evaluate(p, v), k) for p, k in comp_all)
    if region is None:
        return unknown("too many faces in the hypothesis region")
    if not region:
        return SAT
    undecided = False
    for v in region:
        point = {x: v[x] for x in seeds}
        inst = [(L.substitute(p, {x: L.const(c) for x, c in point.items()}), k) for p, k in ccons]
        r = _exists_cons(inst, solver)
        if r.unsat:
            if exact(v) and all(_holds_const(L.evaluate(p, v), k) for p, k in comp):
                return SolveResult("unsat", {x: v[x] for x in names if x in v},
                                   reason="counterexample")
            undecided = True
        elif r.unknown:
            undecided = True
    if undecided:
        return unknown("a relaxed vertex fails the conclusion")
    if not concl_linear and len(region) > 1:
        return unknown("nonlinear conclusion over a non-singleton hypothesis region")
    return SAT


def _forall_fails(hp: Presolved, solver: Solver) -> SolveResult:
    """The conclusion is unsatisfiable outright: valid iff the hypothesis is."""
    status, payload = _solve_residue(hp.cons, hp.free(), solver)
    if status == "unsat":
        return SAT
    if status == "sat":
        return SolveResult("unsat", hp.model(payload), reason="counterexample")
    return unknown("hypothesis feasibility undecided")


def _presolve_existential(cons: List[Constraint], universal: set) -> Optional[List[Constraint]]:
    """Pin or eliminate existential variables through linear equalities.

    Sound for ∃: x = e with x ∈ [0,1] is replaced by 0 ≤ e ≤ 1.  Returns
    None when a constant constraint fails.
    """
    work = list(cons)
    while True:
        pick = None
        for idx, (p, k) in enumerate(work):
            if k != "eq" or L.degree(p) != 1:
                continue
            coeffs, _ = L.linear_coeffs(p)
            ex = [x for x in coeffs if x not in universal]
            if ex:
                pick = (idx, min(ex, key=_var_key))
                if len(coeffs) == 1:
                    break
        if pick is None:
            return work
        idx, x = pick
        p, _ = work.pop(idx)
        coeffs, _ = L.linear_coeffs(p)
        a = coeffs[x]
        e = L.scale(L.add(p, {(x,): a}, -ONE), -1 / a)
        extra = [(L.scale(e, -ONE), "le"), (L.add(e, L.const(1), -ONE), "le")]
        nxt = []
        for q, k in itertools.chain(work, extra):
            q = L.substitute(q, {x: e})
            if L.is_constant(q):
                if not _holds_const(L.constant_of(q), k):
                    return None
                continue
            nxt.append((q, k))
        work = _dedupe(nxt)


def _exists_cons(cons: List[Constraint], solver: Solver) -> SolveResult:
    live = []
    for p, k in cons:
        if L.is_constant(p):
            if not _holds_const(L.constant_of(p), k):
                return UNSAT
        else:
            live.append((p, k))
    ps = presolve(live)
    if ps.unsat:
        return UNSAT
    status, payload = _solve_residue(ps.cons, ps.free(), solver)
    if status == "sat":
        return SolveResult("sat", ps.model(payload))
    if status == "unsat":
        return UNSAT
    return unknown(payload)


# ------------------------------------------------------------------ coupling


def coupling_formula(left: Sequence, right: Sequence, allowed: Iterable[Tuple[int, int]],
                     prefix: str = "$c") -> Tuple[F.Formula, Dict[Tuple[int, int], str]]:
    """Marginal constraints of a coupling over 1-based `allowed` pairs."""
    names = {}
    for i, j in sorted(set(allowed)):
        names[(i, j)] = f"{prefix}{i}_{j}"
    atoms = []
    for i, p in enumerate(left, start=1):
        atoms.append(F.eq(F.total(F.Var(names[(i, j)]) for (a, j) in names if a == i), p))
    for j, q in enumerate(right, start=1):
        atoms.append(F.eq(F.total(F.Var(names[(i, b)]) for (i, b) in names if b == j), q))
    return F.conj(*atoms), names


def coupling_feasible(left: Sequence, right: Sequence, allowed: Iterable[Tuple[int, int]],
                      side: F.Formula = F.TRUE) -> SolveResult:
    """Is there a coupling of the marginals supported on `allowed`?"""
    phi, names = coupling_formula(left, right, allowed)
    r = solve_exists(F.conj(phi, side))
    if not r.sat:
        return r
    coupling = {ij: r.model.get(v, ZERO) for ij, v in names.items()}
    return SolveResult("sat", r.model, coupling=coupling)
