"""Reference evaluator for fully static programs, run directly on source terms.

Distribution values are lists of (value, Fraction); duplicates are kept.
"""

from __future__ import annotations

from fractions import Fraction

from gradprob import source as src


def subst(m, x: str, v):
    """m[v/x] for a closed value v."""
    match m:
        case src.Var(y):
            return v if y == x else m
        case src.RealLit() | src.BoolLit():
            return m
        case src.Lam(y, ty, body):
            return m if y == x else src.Lam(y, ty, subst(body, x, v))
        case src.App(a, b):
            return src.App(subst(a, x, v), subst(b, x, v))
        case src.Add(a, b):
            return src.Add(subst(a, x, v), subst(b, x, v))
        case src.Let(y, a, b):
            return src.Let(y, subst(a, x, v), b if y == x else subst(b, x, v))
        case src.Choice(a, p, b):
            return src.Choice(subst(a, x, v), p, subst(b, x, v))
        case src.AscSimple(a, ty):
            return src.AscSimple(subst(a, x, v), ty)
        case src.AscDist(a, ty):
            return src.AscDist(subst(a, x, v), ty)
        case src.If(c, a, b):
            return src.If(subst(c, x, v), subst(a, x, v), subst(b, x, v))
    raise TypeError(m)


def _scale(p, d):
    return [(v, p * q) for v, q in d]


def run(m):
    match m:
        case src.RealLit() | src.BoolLit() | src.Lam():
            return [(m, Fraction(1))]
        case src.App(src.Lam(x, _, body), v):
            return run(subst(body, x, v))
        case src.Choice(a, p, b):
            return _scale(p, run(a)) + _scale(1 - p, run(b))
        case src.Let(x, a, b):
            out = []
            for v, p in run(a):
                out += _scale(p, run(subst(b, x, v)))
            return out
        case src.AscSimple(v, _):
            return [(v, Fraction(1))]
        case src.AscDist(a, _):
            return run(a)
        case src.Add(src.RealLit(a), src.RealLit(b)):
            return [(src.RealLit(a + b), Fraction(1))]
        case src.If(src.BoolLit(c), a, b):
            return run(a if c else b)
    raise ValueError(f"stuck: {m}")
