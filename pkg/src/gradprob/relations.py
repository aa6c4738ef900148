"""Type relations: lifting, well-formedness, consistency, precision,
reordering, the meet (via the witness operator W) and initial reorder
evidence.

Relations on gradual types are always computed on their lifting to formula
types.  Each relation returns a bool; an undecided solver query raises
`SolverUnknown` carrying the query in SMT-LIB form.
"""

from __future__ import annotations

from fractions import Fraction
from typing import Callable

from . import formula as F
from . import smtlib
from . import solver as S
from .formula import TaggedVar
from .gtypes import (BoolT, DynT, FDist, Fun, GDist, RealT, Simple,
                     UnknownProb, Undefined, tag_left, tag_right)


# ------------------------------------------------------------------- lifting


def lift_prob(p, w: TaggedVar) -> F.Formula:
    if isinstance(p, UnknownProb):
        return F.unit(w)
    return F.eq(w, p)


def lift_simple(t: Simple) -> Simple:
    if isinstance(t, Fun):
        return Fun(lift_simple(t.dom), lift_dist(t.cod))
    return t


def lift_dist(g) -> FDist:
    """Fresh ⟨x_i, i, i⟩ per entry, their lifted probabilities and the total."""
    if isinstance(g, FDist):
        return g
    entries = []
    parts = []
    for i, (t, p) in enumerate(g.entries, start=1):
        w = F.fresh_tagged_var(i, i)
        entries.append((lift_simple(t), w))
        parts.append(lift_prob(p, w))
    parts.append(F.eq(F.total(w for _, w in entries), 1))
    return FDist(F.conj(*parts), tuple(entries))


def lift(x):
    return lift_dist(x) if isinstance(x, (GDist, FDist)) else lift_simple(x)


# ---------------------------------------------------------------- solver glue


def _decide(r: S.SolveResult, query: str) -> bool:
    if r.unknown:
        raise S.SolverUnknown(r.reason, query)
    return r.sat


def _exists(phi: F.Formula) -> bool:
    r = S.solve_exists(phi)
    return _decide(r, smtlib.emit_exists(phi) if r.unknown else "")


def _dist_vars(t: FDist) -> set:
    return F.free_vars(t.formula) | {p.id for p in t.probs if isinstance(p, TaggedVar)}


def apart(b: FDist, a: FDist) -> FDist:
    """Rename the top-level variables of `b` that also occur in `a`."""
    used = _dist_vars(a)
    clash = _dist_vars(b) & used
    if not clash:
        return b
    used |= _dist_vars(b)
    names = {}
    for x in sorted(clash):
        y = x + "'"
        while y in used:
            y += "'"
        used.add(y)
        names[x] = y
    entries = tuple((t, TaggedVar(names.get(p.id, p.id), p.left, p.right)
                     if isinstance(p, TaggedVar) else p) for t, p in b.entries)
    return FDist(F.rename(b.formula, names), entries)


def _coupling(a: FDist, b: FDist, allowed) -> bool:
    phi, _ = S.coupling_formula(a.probs, b.probs, allowed)
    return _exists(F.conj(phi, a.formula, b.formula))


def coupling_query(a: FDist, b: FDist, rel: Callable) -> F.Formula:
    """The existential coupling formula for lifting `rel` (for diagnostics)."""
    allowed = _pairs(a, b, rel)
    phi, _ = S.coupling_formula(a.probs, b.probs, allowed)
    return F.conj(phi, a.formula, b.formula)


def _pairs(a: FDist, b: FDist, rel: Callable) -> set:
    return {(i, j)
            for i, t in enumerate(a.types, start=1)
            for j, u in enumerate(b.types, start=1)
            if rel(t, u)}


# ----------------------------------------------------------- well-formedness


def wf_simple(t: Simple) -> bool:
    if isinstance(t, Fun):
        return wf_simple(t.dom) and wf_dist(t.cod)
    return isinstance(t, (RealT, BoolT, DynT))


def wf_dist(d) -> bool:
    if isinstance(d, GDist):
        if not d.entries:
            return False
        for p in d.probs:
            if isinstance(p, Fraction) and not (0 <= p <= 1):
                return False
        return wf_dist(lift_dist(d))
    if not d.entries:
        return False
    tv = {p.id for p in d.probs if isinstance(p, TaggedVar)}
    if not tv <= F.free_vars(d.formula):
        return False
    if not all(wf_simple(t) for t in d.types):
        return False
    return _exists(F.conj(d.formula, F.eq(F.total(d.probs), 1)))


def well_formed(x) -> bool:
    return wf_dist(x) if isinstance(x, (GDist, FDist)) else wf_simple(x)


# --------------------------------------------------------------- consistency


def consistent_simple(a: Simple, b: Simple) -> bool:
    if isinstance(a, DynT) or isinstance(b, DynT):
        return True
    if isinstance(a, Fun) and isinstance(b, Fun):
        return consistent_simple(a.dom, b.dom) and consistent_dist(a.cod, b.cod)
    return a == b and isinstance(a, (RealT, BoolT))


def consistent_dist(a, b) -> bool:
    a, b = lift_dist(a), lift_dist(b)
    b = apart(b, a)
    return _coupling(a, b, _pairs(a, b, consistent_simple))


def consistent(a, b) -> bool:
    if isinstance(a, (GDist, FDist)):
        return consistent_dist(a, b)
    return consistent_simple(a, b)


# ----------------------------------------------------------------- precision


def precise_simple(a: Simple, b: Simple) -> bool:
    """a ⊑ b: a is at least as precise as b."""
    if isinstance(b, DynT):
        return True
    if isinstance(a, Fun) and isinstance(b, Fun):
        return precise_simple(a.dom, b.dom) and precise_dist(a.cod, b.cod)
    return a == b and isinstance(a, (RealT, BoolT))


def precision_query(a: FDist, b: FDist):
    """(universal, hypothesis, existential, conclusion) of the ∀∃ premise."""
    allowed = _pairs(a, b, precise_simple)
    phi, names = S.coupling_formula(a.probs, b.probs, allowed)
    universal = F.free_vars(a.formula)
    existential = (F.free_vars(b.formula) | set(names.values())) - universal
    return universal, a.formula, existential, F.conj(phi, b.formula)


def precise_dist(a, b) -> bool:
    a, b = lift_dist(a), lift_dist(b)
    b = apart(b, a)
    fast = S.forall_coupling(a.formula, a.probs, b.probs, _pairs(a, b, precise_simple), b.formula)
    if fast is not None:
        return _decide(fast, "")
    u, h, e, c = precision_query(a, b)
    r = S.solve_forall_exists(u, h, e, c)
    return _decide(r, smtlib.emit_forall_exists(u, h, e, c) if r.unknown else "")


def precise(a, b) -> bool:
    if isinstance(a, (GDist, FDist)):
        return precise_dist(a, b)
    return precise_simple(a, b)


# ------------------------------------------------------------------- reorder


def reorder_simple(a: Simple, b: Simple) -> bool:
    if isinstance(a, Fun) and isinstance(b, Fun):
        return reorder_simple(b.dom, a.dom) and reorder_dist(a.cod, b.cod)
    return a == b and isinstance(a, (RealT, BoolT, DynT))


def reorder_dist(a, b) -> bool:
    a, b = lift_dist(a), lift_dist(b)
    b = apart(b, a)
    return _coupling(a, b, _pairs(a, b, reorder_simple))


def reorder(a, b) -> bool:
    if isinstance(a, (GDist, FDist)):
        return reorder_dist(a, b)
    return reorder_simple(a, b)


# --------------------------------------------------------------------- meet


def witness(f: Callable[[Simple, Simple], Simple], a: FDist, b: FDist) -> FDist:
    """W(f, a, b): every coupling over the pairs on which f is defined.

    Entries that the formula forces to zero are pruned and pinned variables
    are folded away.  Raises `Undefined` when no such coupling exists.
    """
    a, b = lift_dist(a), lift_dist(b)
    cells = []
    for i, (t, p) in enumerate(a.entries, start=1):
        for j, (u, q) in enumerate(b.entries, start=1):
            try:
                r = f(t, u)
            except Undefined:
                continue
            cells.append((i, j, r, F.fresh_tagged_var(tag_left(p, i), tag_right(q, j))))
    if not cells:
        raise Undefined("no pair of entries is related")
    parts = []
    for i, p in enumerate(a.probs, start=1):
        parts.append(F.eq(F.total(w for (ci, _, _, w) in cells if ci == i), p))
    for j, q in enumerate(b.probs, start=1):
        parts.append(F.eq(F.total(w for (_, cj, _, w) in cells if cj == j), q))
    phi = F.conj(*parts, a.formula, b.formula)
    if not _exists(phi):
        raise Undefined("no coupling satisfies the constraints")
    live = S.positive_possible(phi, [w.id for *_, w in cells])
    if live is not None:
        dead = [w for *_, w in cells if w.id not in live]
        if len(dead) == len(cells):
            raise Undefined("every coupling entry is forced to zero")
        if dead:
            phi = F.conj(phi, *(F.eq(w, 0) for w in dead))
            cells = [c for c in cells if c[3].id in live]
    keep = {w.id for *_, w in cells}
    phi = S.simplify(phi, keep)
    return FDist(phi, tuple((r, w) for (_, _, r, w) in cells))


def meet_simple(a: Simple, b: Simple) -> Simple:
    if isinstance(a, DynT):
        return b
    if isinstance(b, DynT):
        return a
    if isinstance(a, Fun) and isinstance(b, Fun):
        return Fun(meet_simple(a.dom, b.dom), meet_dist(a.cod, b.cod))
    if a == b and isinstance(a, (RealT, BoolT)):
        return a
    raise Undefined("no common refinement")


def meet_dist(a, b) -> FDist:
    return witness(meet_simple, a, b)


def meet(a, b):
    """Consistent transitivity; raises `Undefined` on failure."""
    if isinstance(a, (GDist, FDist)):
        return meet_dist(a, b)
    return meet_simple(lift_simple(a), lift_simple(b))


def init_reorder_simple(a: Simple, b: Simple) -> Simple:
    if isinstance(a, Fun) and isinstance(b, Fun):
        return Fun(init_reorder_simple(a.dom, b.dom), init_reorder_dist(a.cod, b.cod))
    if a == b and isinstance(a, (RealT, BoolT, DynT)):
        return a
    raise Undefined("types are not reorderings of each other")


def init_reorder_dist(a, b) -> FDist:
    return witness(init_reorder_simple, a, b)


def init_reorder(a, b):
    if isinstance(a, (GDist, FDist)):
        return init_reorder_dist(a, b)
    return init_reorder_simple(a, b)


def try_meet(a, b):
    """The meet, or None when undefined."""
    try:
        return meet(a, b)
    except Undefined:
        return None


# ------------------------------------------------------------------ evidence


def evidence_valid(ev, a, b) -> bool:
    """ε ⊢ a ∼ b iff ε ⊑ a and ε ⊑ b."""
    return precise(ev, a) and precise(ev, b)


# ------------------------------------------------------ static type equality


def static_eq_simple(a: Simple, b: Simple) -> bool:
    """Semantic equality =ₛ on static simple types."""
    if isinstance(a, Fun) and isinstance(b, Fun):
        return static_eq_simple(a.dom, b.dom) and static_eq_dist(a.cod, b.cod)
    return a == b and isinstance(a, (RealT, BoolT))


def static_eq_dist(a: GDist, b: GDist) -> bool:
    """=ₛ on static distribution types, via a coupling of equal entries."""
    allowed = {(i, j)
               for i, t in enumerate(a.types, start=1)
               for j, u in enumerate(b.types, start=1)
               if static_eq_simple(t, u)}
    r = S.coupling_feasible(a.probs, b.probs, allowed)
    return _decide(r, "")


def static_eq(a, b) -> bool:
    if isinstance(a, GDist):
        return static_eq_dist(a, b)
    return static_eq_simple(a, b)


__all__ = [
    "lift", "lift_prob", "lift_simple", "lift_dist", "well_formed", "wf_simple", "wf_dist",
    "consistent", "consistent_simple", "consistent_dist", "precise", "precise_simple",
    "precise_dist", "reorder", "reorder_simple", "reorder_dist", "witness", "meet",
    "meet_simple", "meet_dist", "init_reorder", "init_reorder_simple", "init_reorder_dist",
    "try_meet", "evidence_valid", "static_eq", "static_eq_simple", "static_eq_dist",
    "coupling_query", "precision_query", "apart",
]
