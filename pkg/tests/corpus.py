"""Hypothesis strategies for small programs and distribution types.

Terms have at most six AST nodes, distribution types at most three entries,
and every generated probability has a denominator of at most twelve.  Terms
are built type-directed so that most of them typecheck; a small share is
deliberately ill-typed.
"""

from __future__ import annotations

from fractions import Fraction

from hypothesis import strategies as st

from gradprob import source as src
from gradprob.checker import TypeCheckError, typecheck_splc, typeof_value_gplc
from gradprob.gtypes import (BOOL, DYN, REAL, UNKNOWN, BoolT, DynT, Fun, GDist, RealT,
                             dirac)

MAX_NODES = 6
MAX_DEN = 12
BASE = (REAL, BOOL)
FUNS = (Fun(REAL, dirac(REAL)), Fun(BOOL, dirac(REAL)), Fun(REAL, dirac(BOOL)))


def probs(draw, n: int):
    """n positive rationals over a common denominator of at most 12, summing to 1."""
    if n == 1:
        return [Fraction(1)]
    d = draw(st.integers(n, MAX_DEN))
    cuts = sorted(draw(st.lists(st.integers(1, d - 1), min_size=n - 1, max_size=n - 1,
                                unique=True)))
    bounds = [0, *cuts, d]
    return [Fraction(b - a, d) for a, b in zip(bounds, bounds[1:])]


def prob(draw) -> Fraction:
    d = draw(st.integers(2, MAX_DEN))
    return Fraction(draw(st.integers(1, d - 1)), d)


# ------------------------------------------------------------------- types


def simple_types(gradual: bool = True):
    leaves = [st.just(REAL), st.just(BOOL)] + ([st.just(DYN)] if gradual else [])
    return st.one_of(*leaves, st.sampled_from(FUNS))


@st.composite
def dist_types(draw, gradual: bool = True, concrete: bool = False):
    """Well-formed distribution types with one to three entries."""
    n = draw(st.integers(1, 3))
    ps = probs(draw, n)
    tys = [draw(simple_types(gradual)) for _ in range(n)]
    if gradual and not concrete:
        ps = [UNKNOWN if draw(st.integers(0, 3)) == 0 else p for p in ps]
    return GDist(tuple(zip(tys, ps)))


def coarsen(draw, g: GDist, concrete: bool = False) -> GDist:
    """A less precise variant: some entry types and probabilities become ?."""
    out = []
    for t, p in g.entries:
        if draw(st.booleans()):
            t = DYN
        if not concrete and draw(st.integers(0, 2)) == 0:
            p = UNKNOWN
        out.append((t, p))
    return GDist(tuple(out))


@st.composite
def related_pairs(draw, concrete: bool = False):
    """(a, b) pairs biased towards consistent types, so that meets are often defined."""
    a = draw(dist_types(concrete=concrete))
    mode = draw(st.integers(0, 2))
    if mode == 0:
        return a, draw(dist_types(concrete=concrete))
    b = coarsen(draw, a, concrete)
    if mode == 2:
        b = GDist(tuple(reversed(b.entries)))
    return a, b


@st.composite
def evidence_quads(draw):
    """(e1, e2, e3, e4) with e1 ⊑ e2 and e3 ⊑ e4, all probabilities concrete.

    e3 is usually a reordering or coarsening of e1 so that e1 ∘ e3 is often defined.
    """
    e1 = draw(dist_types(concrete=True))
    mode = draw(st.integers(0, 2))
    if mode == 0:
        e3 = draw(dist_types(concrete=True))
    else:
        e3 = coarsen(draw, e1, concrete=True)
        if mode == 2:
            e3 = GDist(tuple(reversed(e3.entries)))
    return e1, coarsen(draw, e1, concrete=True), e3, coarsen(draw, e3, concrete=True)


# ------------------------------------------------------------------- terms


class _Gen:
    def __init__(self, draw):
        self.draw = draw
        self.counter = 0

    def fresh(self) -> str:
        self.counter += 1
        return "xyzuvw"[self.counter % 6] if self.counter < 6 else f"x{self.counter}"

    def pick(self, options):
        return self.draw(st.sampled_from(options))

    def literal(self, ty):
        if isinstance(ty, RealT):
            return src.RealLit(Fraction(self.draw(st.integers(0, 3))))
        return src.BoolLit(self.draw(st.booleans()))

    def value_of(self, ty, env):
        """A one-node value of type `ty` (a literal or a variable)."""
        names = [x for x, t in env.items() if t == ty]
        if names and self.draw(st.booleans()):
            return src.Var(self.pick(names))
        if isinstance(ty, (RealT, BoolT)):
            return self.literal(ty)
        return src.Var(names[0]) if names else self.literal(REAL)

    def value(self, budget, env):
        kinds = ["lit"] + (["var"] if env else []) + (["lam"] if budget >= 2 else [])
        k = self.pick(kinds)
        if k == "lit":
            return self.literal(self.pick(BASE))
        if k == "var":
            return src.Var(self.pick(sorted(env)))
        x = self.fresh()
        ty = self.pick(BASE + FUNS[:1])
        return src.Lam(x, ty, self.term(budget - 1, {**env, x: ty}))

    def term(self, budget, env):
        kinds = ["value", "asc"]
        if budget >= 3:
            kinds += ["choice", "let", "app", "add"]
        if budget >= 4:
            kinds += ["if", "applam"]
        if budget >= 2:
            kinds += ["ascdist"]
        k = self.pick(kinds)
        if k == "value":
            return self.value(budget, env)
        if k == "choice":
            b1 = self.draw(st.integers(1, budget - 2))
            return src.Choice(self.term(b1, env), prob(self.draw),
                              self.term(budget - 1 - b1, env))
        if k == "let":
            b1 = self.draw(st.integers(1, budget - 2))
            bound = self.term(b1, env)
            x = self.fresh()
            ty = self._first_type(bound, env) or self.pick(BASE)
            return src.Let(x, bound, self.term(budget - 1 - b1, {**env, x: ty}))
        if k == "app":
            funs = [x for x, t in env.items() if isinstance(t, Fun)]
            if funs:
                f = self.pick(funs)
                return src.App(src.Var(f), self._arg(env[f].dom, env))
            k = "add"
        if k == "applam":
            x = self.fresh()
            ty = self.pick(BASE)
            lam = src.Lam(x, ty, self.term(budget - 3, {**env, x: ty}))
            return src.App(lam, self._arg(ty, env))
        if k == "add":
            return src.Add(self._arg(REAL, env), self._arg(REAL, env))
        if k == "if":
            c = self._arg(BOOL, env)
            b1 = self.draw(st.integers(1, budget - 3))
            return src.If(c, self.term(b1, env), self.term(budget - 2 - b1, env))
        if k == "asc":
            v = self.value(budget - 1, env) if budget >= 2 else self.literal(self.pick(BASE))
            return src.AscSimple(v, self._annotation(v, env))
        m = self.term(budget - 1, env)
        return src.AscDist(m, self._dist_annotation(m, env))

    def _arg(self, ty, env):
        """Mostly well-typed; one time in eight, a literal of the other base type."""
        if isinstance(ty, (RealT, BoolT)) and self.draw(st.integers(0, 7)) == 0:
            return self.literal(BOOL if isinstance(ty, RealT) else REAL)
        return self.value_of(ty, env)

    def _first_type(self, m, env):
        try:
            return typecheck_splc(m, env).entries[0][0]
        except TypeCheckError:
            return None

    def _annotation(self, v, env):
        try:
            ty = typeof_value_gplc(v, env)
        except TypeCheckError:
            ty = REAL
        if self.draw(st.integers(0, 7)) == 0:
            return BOOL if ty == REAL else REAL
        return ty

    def _dist_annotation(self, m, env):
        try:
            g = typecheck_splc(m, env)
        except TypeCheckError:
            return dirac(REAL)
        roll = self.draw(st.integers(0, 7))
        if roll == 0:
            return GDist(tuple((BOOL if t == REAL else REAL, p) for t, p in g.entries))
        if roll <= 2:
            return GDist(tuple(reversed(g.entries)))
        if roll == 3:
            return _merge_equal(g)
        return g


def _merge_equal(g: GDist) -> GDist:
    out: dict = {}
    for t, p in g.entries:
        out[t] = out.get(t, Fraction(0)) + p
    return GDist(tuple(out.items()))


@st.composite
def static_terms(draw):
    budget = draw(st.integers(1, MAX_NODES))
    return _Gen(draw).term(budget, {})


# ---------------------------------------------------------------- mutation


def _mutate_simple(draw, t):
    if isinstance(t, DynT):
        return t
    if draw(st.booleans()):
        return DYN
    if isinstance(t, Fun):
        return Fun(_mutate_simple(draw, t.dom), _mutate_dist(draw, t.cod))
    return t


def _mutate_dist(draw, g: GDist) -> GDist:
    out = []
    for t, p in g.entries:
        t = _mutate_simple(draw, t) if draw(st.booleans()) else t
        p = UNKNOWN if draw(st.integers(0, 2)) == 0 else p
        out.append((t, p))
    return GDist(tuple(out))


def mutate(draw, m):
    """The ?-mutation operator: some annotations and choice probabilities become ?."""
    go = lambda n: mutate(draw, n)  # noqa: E731
    match m:
        case src.Var() | src.RealLit() | src.BoolLit():
            return m
        case src.Lam(x, ty, body):
            ty = _mutate_simple(draw, ty) if draw(st.booleans()) else ty
            return src.Lam(x, ty, go(body))
        case src.App(a, b):
            return src.App(go(a), go(b))
        case src.Add(a, b):
            return src.Add(go(a), go(b))
        case src.Let(x, a, b):
            return src.Let(x, go(a), go(b))
        case src.Choice(a, p, b):
            p = UNKNOWN if draw(st.booleans()) else p
            return src.Choice(go(a), p, go(b))
        case src.AscSimple(v, ty):
            ty = _mutate_simple(draw, ty) if draw(st.booleans()) else ty
            return src.AscSimple(go(v), ty)
        case src.AscDist(a, ty):
            ty = _mutate_dist(draw, ty) if draw(st.booleans()) else ty
            return src.AscDist(go(a), ty)
        case src.If(c, a, b):
            return src.If(go(c), go(a), go(b))
    raise TypeError(m)


@st.composite
def mutated_pairs(draw):
    """(m, n) with m static and n = m after ?-mutation, so m ⊑ n."""
    m = draw(static_terms())
    return m, mutate(draw, m)
