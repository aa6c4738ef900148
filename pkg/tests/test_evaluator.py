from fractions import Fraction as Q

from gradprob import formula as F
from gradprob import relations as R
from gradprob import solver as S
from gradprob import target as T
from gradprob.checker import typecheck_distvalue
from gradprob.evaluator import (Converged, DistValue, FuelExhausted, _Machine, combine, dirac,
                                evaluate, has_error_mass)
from gradprob.formula import TaggedVar
from gradprob.gtypes import BOOL, DYN, REAL, FDist
from gradprob.printer import normalize
from helpers import folded, program, run_text

ONE = T.Asc(REAL, T.RealLit(Q(1)), REAL)
TT = T.Asc(BOOL, T.BoolLit(True), BOOL)


def test_nested_choice():
    r = run_text(program("nested_choice.gplc"))
    assert isinstance(r, Converged)
    assert folded(r.value) == {"1": Q(1, 3), "2": Q(1, 3), "true": Q(1, 3)}


def test_let_sums_weighted_bodies():
    r = run_text("let a = 1 (+ 1/4 +) 2 in a + 10")
    assert folded(r.value) == {"11": Q(1, 4), "12": Q(3, 4)}


def test_if_and_application():
    assert folded(run_text("(\\b:Bool. if b then 1 else 2) false").value) == {"2": 1}


def test_distribution_ascription_reorders():
    r = run_text(program("mixed_ascription.gplc"))
    assert folded(r.value) == {"true": Q(1, 2), "1": Q(1, 2)}
    assert not has_error_mass(r.value)


def test_discussion_program_fails_at_runtime():
    r = run_text(program("ascription_failure.gplc"))
    assert isinstance(r, Converged)
    assert has_error_mass(r.value)
    assert folded(r.value) == {"err@Real": Q(1, 3), "err@Bool": Q(2, 3)}


def test_simple_cast_failure_is_an_error_value():
    r = run_text("(\\x:?. x + 1) true")
    assert folded(r.value) == {"err@Real": 1}


def test_unknown_choice_keeps_symbolic_weights():
    r = run_text(program("unknown_choice.gplc"))
    entries, residual = normalize(r.value)
    assert residual
    assert [(e.value, e.low, e.high) for e in entries] == [("1", 0, 1), ("true", 0, 1)]


def test_omega_exhausts_fuel():
    r = run_text(program("omega.gplc"), fuel=200)
    assert r == FuelExhausted(200)


def test_evidence_pushing_example():
    """{tt^1/2, 1^1/2} under evidence {Real^1/6, Real^1/3, Bool^1/2} into {?^2/3, Real^1/3}."""
    def fd(pairs, tags):
        ws = [TaggedVar(F.fresh_name(), a, b) for a, b in tags]
        phi = F.conj(*(F.eq(w, p) for w, (_, p) in zip(ws, pairs)))
        return FDist(phi, tuple((t, w) for w, (t, _) in zip(ws, pairs)))
    ev = fd([(REAL, Q(1, 6)), (REAL, Q(1, 3)), (BOOL, Q(1, 2))], [(1, 1), (1, 2), (2, 1)])
    src = fd([(REAL, Q(1, 2)), (BOOL, Q(1, 2))], [(1, 1), (2, 2)])
    ty = fd([(DYN, Q(2, 3)), (REAL, Q(1, 3))], [(1, 1), (2, 2)])
    w1, w2 = TaggedVar("c1", 0, 0), TaggedVar("c2", 0, 0)
    inner = T.Choice(TT, F.conj(F.eq(w1, Q(1, 2)), F.eq(w2, Q(1, 2))), w1, w2, ONE)
    r = evaluate(T.AscDist(ev, inner, ty, src))
    got = sorted(((v.value, v.ty, p) for v, p in r.value.entries), key=repr)
    want = [(T.BoolLit(True), DYN, Q(1, 2)), (T.RealLit(Q(1)), DYN, Q(1, 6)),
            (T.RealLit(Q(1)), REAL, Q(1, 3))]
    assert got == sorted(want, key=repr)


def test_combine_concrete():
    a, b = dirac(ONE), dirac(TT)
    d = combine([Q(1, 2), Q(1, 2)], [a, b])
    assert d.entries == ((ONE, Q(1, 2)), (TT, Q(1, 2)))


def test_combine_symbolic_weights_stay_symbolic():
    w1, w2 = TaggedVar("c1", 0, 0), TaggedVar("c2", 0, 0)
    phi = F.eq(F.total([w1, w2]), 1)
    d = combine([w1, w2], [dirac(ONE), dirac(TT)], phi)
    assert all(isinstance(p, TaggedVar) for p in d.probs)
    assert S.solve_exists(F.conj(d.formula, F.eq(F.total(d.probs), 1))).sat


def test_sub_replaces_variable():
    m = _Machine(100)
    assert m.sub(T.Var("x"), ONE, "x") == ONE
    lam = T.Asc(R.lift(REAL), T.Lam("y", REAL, T.Var("y"), None), REAL)
    assert m.sub(lam, ONE, "x") == lam


def test_sub_with_error_yields_dist_error():
    m = _Machine(100)
    body = T.Add(T.Var("x"), ONE)
    out = m.sub(body, T.ErrSimple(REAL), "x")
    assert isinstance(out, T.ErrDist)


def test_probability_conservation():
    for text in ["(1 (+ 1/2 +) 2) (+ 2/3 +) true", "let y = 1 (+ ? +) true in (\\x:?. x :: Real) y"]:
        d = run_text(text).value
        total = F.total(d.probs)
        assert S.solve_exists(F.conj(d.formula, F.eq(total, 1))).sat
        assert S.solve_exists(F.conj(d.formula, F.lt(total, 1))).unsat
        assert S.solve_exists(F.conj(d.formula, F.lt(1, total))).unsat


def test_value_distribution_types_are_reorders():
    text = "(1 (+ 1/3 +) true) :: {?^1/3, Bool^2/3}"
    from gradprob.elaborate import elaborate
    from gradprob.parser import parse
    out = elaborate(parse(text))
    d = evaluate(out.target).value
    assert R.reorder(typecheck_distvalue(d.formula, d.entries), R.lift(out.ty))


def test_distvalue_dataclass():
    d = DistValue(F.TRUE, ((ONE, Q(1)),))
    assert d.values == [ONE] and d.probs == [1]
