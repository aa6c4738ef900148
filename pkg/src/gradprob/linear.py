"""Exact polynomial arithmetic and exact linear programming over rationals.

Polynomials are dicts from sorted monomial tuples to `Fraction`
coefficients; the empty monomial is the constant term.  The LP routine is a
dense two-phase simplex with Bland's rule, so it terminates and never
rounds.  Tableau arithmetic uses gmpy2 rationals when installed.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Dict, Iterable, List, Mapping, Optional, Sequence, Tuple

from . import formula as F

try:  # faster exact rationals when available
    from gmpy2 import mpq as Num
except ImportError:  # pragma: no cover
    Num = Fraction

Poly = Dict[tuple, Fraction]
ZERO = Fraction(0)
ONE = Fraction(1)


# ---------------------------------------------------------------- polynomials


def const(c) -> Poly:
    c = Fraction(c)
    return {(): c} if c else {}


def var(x: str) -> Poly:
    return {(x,): ONE}


def add(a: Poly, b: Poly, k: Fraction = ONE) -> Poly:
    """a + k·b"""
    out = dict(a)
    for m, c in b.items():
        v = out.get(m, ZERO) + k * c
        if v:
            out[m] = v
        else:
            out.pop(m, None)
    return out


def scale(a: Poly, k: Fraction) -> Poly:
    if not k:
        return {}
    return {m: c * k for m, c in a.items()}


def mul(a: Poly, b: Poly) -> Poly:
    out: Poly = {}
    for m1, c1 in a.items():
        for m2, c2 in b.items():
            m = tuple(sorted(m1 + m2))
            v = out.get(m, ZERO) + c1 * c2
            if v:
                out[m] = v
            else:
                out.pop(m, None)
    return out


def degree(a: Poly) -> int:
    return max((len(m) for m in a), default=0)


def poly_vars(a: Poly) -> set:
    return {x for m in a for x in m}


def constant_of(a: Poly) -> Fraction:
    return a.get((), ZERO)


def is_constant(a: Poly) -> bool:
    return all(m == () for m in a)


def substitute(a: Poly, env: Mapping[str, Poly]) -> Poly:
    """Replace variables by polynomials."""
    if not any(x in env for m in a for x in m):
        return a
    out: Poly = {}
    for m, c in a.items():
        term = const(c)
        rest = []
        for x in m:
            if x in env:
                term = mul(term, env[x])
            else:
                rest.append(x)
        if rest:
            term = mul(term, {tuple(rest): ONE})
        out = add(out, term)
    return out


def evaluate(a: Poly, env: Mapping[str, Fraction]) -> Fraction:
    total = ZERO
    for m, c in a.items():
        v = c
        for x in m:
            v *= env[x]
        total += v
    return total


def linear_coeffs(a: Poly) -> Tuple[Dict[str, Fraction], Fraction]:
    """Split a degree-1 polynomial into ({x: coeff}, constant)."""
    coeffs = {}
    for m, c in a.items():
        if len(m) == 1:
            coeffs[m[0]] = c
        elif len(m) > 1:
            raise ValueError("not linear")
    return coeffs, constant_of(a)


class NonConstantDenominator(Exception):
    pass


def from_expr(e: F.Expr) -> Tuple[Poly, Poly]:
    """Rational function numerator/denominator of an expression."""
    match e:
        case F.Const(v):
            return const(v), const(1)
        case F.Var(x):
            return var(x), const(1)
        case F.Add(l, r) | F.Sub(l, r):
            n1, d1 = from_expr(l)
            n2, d2 = from_expr(r)
            k = ONE if isinstance(e, F.Add) else -ONE
            if d1 == d2:
                return add(n1, n2, k), d1
            return add(mul(n1, d2), mul(n2, d1), k), mul(d1, d2)
        case F.Mul(l, r):
            n1, d1 = from_expr(l)
            n2, d2 = from_expr(r)
            return mul(n1, n2), mul(d1, d2)
        case F.Div(l, r):
            n1, d1 = from_expr(l)
            n2, d2 = from_expr(r)
            return mul(n1, d2), mul(d1, n2)
    raise TypeError(e)


# ------------------------------------------------------------------- simplex


class LPResult:
    __slots__ = ("status", "value", "point")

    def __init__(self, status: str, value: Optional[Fraction] = None,
                 point: Optional[Dict[str, Fraction]] = None):
        self.status = status
        self.value = value
        self.point = point

    @property
    def feasible(self) -> bool:
        return self.status == "optimal"

    def __repr__(self):
        return f"LPResult({self.status}, {self.value})"


def _pivot(rows: List[list], obj: list, r: int, c: int) -> None:
    row = rows[r]
    p = row[c]
    if p != 1:
        inv = 1 / p
        row[:] = [v * inv if v else v for v in row]
    nz = [(k, v) for k, v in enumerate(row) if v]
    for i, other in enumerate(rows):
        if i != r:
            f = other[c]
            if f:
                for k, v in nz:
                    other[k] -= f * v
    f = obj[c]
    if f:
        for k, v in nz:
            obj[k] -= f * v


def _run(rows, obj, basis, allowed) -> str:
    """Minimise; `obj` holds reduced costs with -value in the last slot.

    Dantzig pricing, falling back to Bland's rule after a run of degenerate
    pivots so that cycling cannot occur.
    """
    degenerate = 0
    while True:
        enter = -1
        if degenerate > 50:
            for j in allowed:
                if obj[j] < 0:
                    enter = j
                    break
        else:
            best = 0
            for j in allowed:
                if obj[j] < best:
                    best, enter = obj[j], j
        if enter < 0:
            return "optimal"
        best = None
        leave = -1
        for i, row in enumerate(rows):
            a = row[enter]
            if a > 0:
                ratio = row[-1] / a
                if best is None or ratio < best or (ratio == best and basis[i] < basis[leave]):
                    best, leave = ratio, i
        if leave < 0:
            return "unbounded"
        degenerate = degenerate + 1 if best == 0 else 0
        _pivot(rows, obj, leave, enter)
        basis[leave] = enter


def _frac(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(int(v.numerator), int(v.denominator))


def lp(variables: Sequence[str], objective: Mapping[str, Fraction],
       eqs: Iterable[Tuple[Mapping[str, Fraction], Fraction]] = (),
       les: Iterable[Tuple[Mapping[str, Fraction], Fraction]] = (),
       upper: Optional[Mapping[str, Fraction]] = None,
       maximize: bool = True) -> LPResult:
    """Optimise over 0 ≤ x ≤ upper[x] (default 1), Σ a·x = b, Σ a·x ≤ b.

    `upper[x] = None` leaves x unbounded above.
    """
    zero, one = Num(0), Num(1)
    names = list(variables)
    n = len(names)
    index = {x: i for i, x in enumerate(names)}
    cons: List[Tuple[list, object, bool]] = []  # (coeffs, rhs, is_le)
    for group, le in ((eqs, False), (les, True)):
        for coeffs, b in group:
            row = [zero] * n
            for x, a in coeffs.items():
                row[index[x]] += Num(a)
            cons.append((row, Num(b), le))
    for x in names:
        u = ONE if upper is None else upper.get(x, ONE)
        if u is not None:
            row = [zero] * n
            row[index[x]] = one
            cons.append((row, Num(u), True))

    n_slack = sum(1 for _, _, le in cons if le)
    n_art = sum(1 for _, b, le in cons if not le or b < 0)
    width = n + n_slack + n_art + 1
    rows = []
    basis = []
    artificial = set()
    s, a = n, n + n_slack
    for coeffs, b, le in cons:
        row = [zero] * width
        row[:n] = coeffs
        slack = None
        if le:
            row[s] = one
            slack = s
            s += 1
        row[-1] = b
        if le and b >= 0:
            basis.append(slack)  # the slack is a feasible starting basic variable
        else:
            if b < 0:
                row = [-v for v in row]
            row[a] = one
            artificial.add(a)
            basis.append(a)
            a += 1
        rows.append(row)
    structural = list(range(n + n_slack))

    if artificial:
        # phase 1: minimise the sum of artificials
        obj = [zero] * width
        for i, row in enumerate(rows):
            if basis[i] in artificial:
                for k in range(width):
                    if row[k] and k not in artificial:
                        obj[k] -= row[k]
        _run(rows, obj, basis, structural)
        if obj[-1] != 0:
            return LPResult("infeasible")
        keep = []
        for i, b in enumerate(basis):
            if b in artificial:
                for j in structural:
                    if rows[i][j]:
                        _pivot(rows, obj, i, j)
                        basis[i] = j
                        break
            if basis[i] not in artificial:
                keep.append(i)
        rows = [rows[i] for i in keep]
        basis = [basis[i] for i in keep]

    # phase 2
    sign = -one if maximize else one
    obj = [zero] * width
    for x, c in objective.items():
        obj[index[x]] = sign * Num(c)
    for i, b in enumerate(basis):
        f = obj[b]
        if f:
            for k, v in enumerate(rows[i]):
                if v:
                    obj[k] -= f * v
    status = _run(rows, obj, basis, structural)
    if status == "unbounded":
        return LPResult("unbounded")
    point = {x: ZERO for x in names}
    for i, b in enumerate(basis):
        if b < n:
            point[names[b]] = _frac(rows[i][-1])
    value = sum((Fraction(objective.get(x, 0)) * point[x] for x in names), ZERO)
    return LPResult("optimal", value, point)


# --------------------------------------------------------------- linear algebra


def rank(rows: Sequence[Mapping[str, Fraction]]) -> int:
    """Rank of a set of sparse linear forms."""
    pivots: List[Tuple[str, Dict[str, Fraction]]] = []
    r = 0
    for row in rows:
        v = {k: Fraction(c) for k, c in row.items() if c}
        for x, p in pivots:
            c = v.get(x)
            if c:
                for k, a in p.items():
                    nv = v.get(k, ZERO) - c * a
                    if nv:
                        v[k] = nv
                    else:
                        v.pop(k, None)
        if v:
            x = min(v)
            c = v[x]
            p = {k: a / c for k, a in v.items()}
            # keep earlier pivots reduced
            pivots.append((x, p))
            r += 1
    return r
