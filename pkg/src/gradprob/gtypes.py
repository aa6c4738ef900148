"""Types of the three calculi.

Static types are gradual types without `?`; formula types share the simple
type constructors with gradual types and differ only in the codomain of
function types, which is a `FDist` instead of a `GDist`.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Union

from . import formula as F
from .formula import TaggedVar


class _Singleton:
    _instance = None

    def __new__(cls):
        if cls._instance is None:
            cls._instance = super().__new__(cls)
        return cls._instance

    def __reduce__(self):
        return (type(self), ())

    def __eq__(self, other):
        return type(other) is type(self)

    def __hash__(self):
        return hash(type(self).__name__)


class UnknownProb(_Singleton):
    def __repr__(self):
        return "?"


UNKNOWN = UnknownProb()
GProb = Union[Fraction, UnknownProb]


# ---------------------------------------------------------------- simple types


class Simple:
    __slots__ = ()


class RealT(Simple, _Singleton):
    def __repr__(self):
        return "Real"


class BoolT(Simple, _Singleton):
    def __repr__(self):
        return "Bool"


class DynT(Simple, _Singleton):
    def __repr__(self):
        return "?"


REAL = RealT()
BOOL = BoolT()
DYN = DynT()


@dataclass(frozen=True)
class Fun(Simple):
    dom: Simple
    cod: "GDist | FDist"


@dataclass(frozen=True)
class GDist:
    """Gradual (or static) distribution type: ordered entries (type, prob)."""
    entries: tuple

    def __post_init__(self):
        if not isinstance(self.entries, tuple):
            object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def types(self):
        return [t for t, _ in self.entries]

    @property
    def probs(self):
        return [p for _, p in self.entries]


@dataclass(frozen=True)
class FDist:
    """Formula distribution type: entries closed under `formula`."""
    formula: F.Formula
    entries: tuple

    def __post_init__(self):
        if not isinstance(self.entries, tuple):
            object.__setattr__(self, "entries", tuple(self.entries))

    @property
    def types(self):
        return [t for t, _ in self.entries]

    @property
    def probs(self):
        return [p for _, p in self.entries]


def dirac(t: Simple) -> GDist:
    return GDist(((t, Fraction(1)),))


def fdirac(t: Simple) -> FDist:
    return FDist(F.TRUE, ((t, Fraction(1)),))


# --------------------------------------------------------------- predicates


def is_static_simple(t: Simple) -> bool:
    if isinstance(t, Fun):
        return is_static_simple(t.dom) and is_static_dist(t.cod)
    return t is not DYN and not isinstance(t, DynT)


def is_static_dist(g: GDist) -> bool:
    return all(isinstance(p, Fraction) and is_static_simple(t) for t, p in g.entries)


# --------------------------------------------------------- dom/cod, gradual


class Undefined(Exception):
    """A partial type function was applied outside its domain."""


def gdom(t: Simple) -> Simple:
    if isinstance(t, Fun):
        return t.dom
    if isinstance(t, DynT):
        return DYN
    raise Undefined(f"dom undefined on {show_simple(t)}")


def gcod(t: Simple) -> GDist:
    if isinstance(t, Fun):
        return t.cod
    if isinstance(t, DynT):
        return GDist(((DYN, UNKNOWN),))
    raise Undefined(f"cod undefined on {show_simple(t)}")


def pmul(a: GProb, b: GProb) -> GProb:
    if isinstance(a, UnknownProb) or isinstance(b, UnknownProb):
        return UNKNOWN
    return a * b


def psub(a: GProb, b: GProb) -> GProb:
    if isinstance(a, UnknownProb) or isinstance(b, UnknownProb):
        return UNKNOWN
    return a - b


def gscale(p: GProb, g: GDist) -> GDist:
    return GDist(tuple((t, pmul(p, q)) for t, q in g.entries))


def gsum(*parts: GDist) -> GDist:
    """Multiset union; the side condition is checked by well-formedness."""
    return GDist(tuple(e for g in parts for e in g.entries))


def known_total_exceeds_one(g: GDist) -> bool:
    return sum((p for p in g.probs if isinstance(p, Fraction)), Fraction(0)) > 1


# ----------------------------------------------------------- tags and scoping


def tag_left(p, pos: int) -> int:
    return p.left if isinstance(p, TaggedVar) else pos


def tag_right(p, pos: int) -> int:
    return p.right if isinstance(p, TaggedVar) else pos


def scale(p, t: FDist) -> FDist:
    """p · (φ ▷ {τᵢ^pᵢ}) with fresh variables carrying the entries' tags."""
    entries = []
    eqs = []
    for i, (ty, q) in enumerate(t.entries, start=1):
        w = F.fresh_tagged_var(tag_left(q, i), tag_right(q, i))
        entries.append((ty, w))
        eqs.append(F.eq(w, _times(p, q)))
    return FDist(F.conj(t.formula, *eqs), tuple(entries))


def _times(p, q) -> F.Expr:
    if isinstance(p, Fraction) and isinstance(q, Fraction):
        return F.Const(p * q)
    if p == 1:
        return F.expr(q)
    if q == 1:
        return F.expr(p)
    return F.Mul(F.expr(p), F.expr(q))


def fsum(phi: F.Formula, parts) -> FDist:
    """φ ▷ Σ parts, shifting each part's tags by the sizes of earlier parts."""
    entries = []
    offset = 0
    for part in parts:
        for j, (ty, q) in enumerate(part.entries, start=1):
            if isinstance(q, TaggedVar):
                q = q.retag(offset + q.left, offset + q.right)
            entries.append((ty, q))
        offset += len(part.entries)
    formula = F.conj(phi, *(part.formula for part in parts),
                     F.eq(F.total(p for _, p in entries), 1))
    return FDist(formula, tuple(entries))


def fdom(t: Simple) -> Simple:
    if isinstance(t, Fun):
        return t.dom
    if isinstance(t, DynT):
        return DYN
    raise Undefined(f"dom undefined on {show_simple(t)}")


def fcod(t: Simple) -> FDist:
    if isinstance(t, Fun):
        return t.cod
    if isinstance(t, DynT):
        w = F.fresh_tagged_var(1, 1)
        return FDist(F.conj(F.unit(w), F.eq(w, 1)), ((DYN, w),))
    raise Undefined(f"cod undefined on {show_simple(t)}")


def dist_vars(t: FDist) -> set:
    """Variables occurring in the entries (not nested codomains)."""
    return {p.id for p in t.probs if isinstance(p, TaggedVar)}


# ----------------------------------------------------------- alpha-equivalence


def canonical_simple(t: Simple) -> Simple:
    """Rename formula variables by order of first occurrence, per scope."""
    if isinstance(t, Fun):
        cod = canonical_dist(t.cod) if isinstance(t.cod, FDist) else t.cod
        return Fun(canonical_simple(t.dom), cod)
    return t


def canonical_dist(t: FDist) -> FDist:
    names: dict = {}

    def name(v: str) -> str:
        if v not in names:
            names[v] = f"c{len(names)}"
        return names[v]

    entries = []
    for ty, p in t.entries:
        if isinstance(p, TaggedVar):
            p = TaggedVar(name(p.id), p.left, p.right)
        entries.append((canonical_simple(ty), p))
    for atom in F.atoms(t.formula):
        for v in _ordered_vars(atom):
            name(v)
    return FDist(F.rename(t.formula, names), tuple(entries))


def _ordered_vars(atom) -> list:
    out: list = []

    def walk(e):
        if isinstance(e, F.Var):
            out.append(e.id)
        elif isinstance(e, (F.Add, F.Sub, F.Mul, F.Div)):
            walk(e.left)
            walk(e.right)

    walk(atom.left)
    walk(atom.right)
    return out


def alpha_eq(a, b) -> bool:
    if isinstance(a, FDist) and isinstance(b, FDist):
        return canonical_dist(a) == canonical_dist(b)
    if isinstance(a, Simple) and isinstance(b, Simple):
        return canonical_simple(a) == canonical_simple(b)
    return False


def erase_simple(t: Simple) -> Simple:
    """Forget codomain formulas and probabilities, keeping only the shape."""
    if isinstance(t, Fun):
        return Fun(erase_simple(t.dom), GDist(tuple((erase_simple(ty), UNKNOWN)
                                                    for ty in t.cod.types)))
    return t


# ------------------------------------------------------------------- printing


def show_prob(p) -> str:
    if isinstance(p, UnknownProb):
        return "?"
    if isinstance(p, TaggedVar):
        return p.id
    return str(p)


def show_simple(t: Simple, tags: bool = False) -> str:
    if isinstance(t, Fun):
        dom = show_simple(t.dom, tags)
        if isinstance(t.dom, Fun):
            dom = f"({dom})"
        return f"{dom} -> {show_dist(t.cod, tags)}"
    return repr(t)


def show_dist(t, tags: bool = False) -> str:
    parts = []
    for ty, p in t.entries:
        s = show_prob(p)
        if tags and isinstance(p, TaggedVar):
            s += f"<{p.left},{p.right}>"
        parts.append(f"{show_simple(ty, tags)}^{s}")
    body = ", ".join(parts)
    if isinstance(t, FDist):
        atoms = list(F.atoms(t.formula))
        if atoms:
            return "{" + body + " | " + F.show(t.formula) + "}"
    return "{" + body + "}"
