from fractions import Fraction as Q

import pytest
from hypothesis import given, settings, strategies as st

from gradprob import formula as F
from gradprob import linear as L
from gradprob import smtlib
from gradprob import solver as S

x, y, z = F.Var("x"), F.Var("y"), F.Var("z")


def test_holds_and_free_vars():
    phi = F.conj(F.eq(F.Add(x, y), 1), F.leq(x, Q(1, 3)))
    assert F.free_vars(phi) == {"x", "y"}
    assert F.holds(phi, {"x": Q(1, 4), "y": Q(3, 4)})
    assert not F.holds(phi, {"x": Q(1, 2), "y": Q(1, 2)})


def test_conj_flattens_and_true_is_empty():
    assert list(F.atoms(F.conj(F.TRUE, F.TRUE))) == []
    phi = F.conj(F.eq(x, 1), F.conj(F.eq(y, 0), F.TRUE))
    assert len(list(F.atoms(phi))) == 2


def test_rename_and_subst():
    phi = F.eq(F.Add(x, y), 1)
    assert F.free_vars(F.rename(phi, {"x": "a"})) == {"a", "y"}
    assert F.holds(F.subst(phi, {"x": F.Const(Q(1, 2))}), {"y": Q(1, 2)})


def test_session_restarts_names():
    with F.session():
        a = F.fresh_name()
    with F.session():
        b = F.fresh_name()
    assert a == b == "w0"


def test_exists_sat_model_is_checked():
    phi = F.conj(F.eq(F.Add(x, y), 1), F.eq(x, Q(1, 3)))
    r = S.solve_exists(phi)
    assert r.sat and F.holds(phi, r.model)
    assert r.model["y"] == Q(2, 3)


def test_exists_unsat_and_bounds():
    assert S.solve_exists(F.conj(F.eq(F.Add(x, y), Q(3)))).unsat  # variables live in [0, 1]
    assert S.solve_exists(F.conj(F.lt(x, 0))).unsat


def test_exists_nonlinear_product():
    phi = F.conj(F.eq(F.Mul(x, y), Q(1, 6)), F.eq(F.Add(x, y), Q(5, 6)))
    r = S.solve_exists(phi)
    assert r.sat and F.holds(phi, r.model)


def test_forall_exists():
    # every x in [0, 1/2] has a y with x + y = 1/2
    hyp = F.leq(x, Q(1, 2))
    assert S.solve_forall_exists({"x"}, hyp, {"y"}, F.eq(F.Add(x, y), Q(1, 2))).sat
    # but not every x in [0, 1]
    assert S.solve_forall_exists({"x"}, F.TRUE, {"y"}, F.eq(F.Add(x, y), Q(1, 2))).unsat


def test_prob_range():
    phi = F.conj(F.eq(F.Add(x, y), 1), F.leq(x, Q(3, 8)))
    assert S.prob_range(phi, x) == (0, Q(3, 8))
    assert S.prob_range(phi, F.Add(x, y)) == (1, 1)


def test_coupling_feasible_diagonal():
    ps = [Q(1, 3), Q(2, 3)]
    r = S.coupling_feasible(ps, ps, {(1, 1), (2, 2)})
    assert r.sat and r.coupling == {(1, 1): Q(1, 3), (2, 2): Q(2, 3)}


@settings(max_examples=60, deadline=None)
@given(st.lists(st.fractions(min_value=0, max_value=1, max_denominator=12), min_size=1,
                max_size=3))
def test_monotonicity_adding_conjuncts(cs):
    """Adding a conjunct never turns Unsat into Sat."""
    base = F.conj(*(F.leq(x, c) for c in cs))
    extra = F.eq(x, cs[0])
    if S.solve_exists(base).unsat:
        assert S.solve_exists(F.conj(base, extra)).unsat


def test_linear_polys():
    p = L.add(L.var("x"), L.const(Q(1, 2)))
    assert L.evaluate(L.mul(p, p), {"x": Q(1, 2)}) == 1
    assert L.degree(L.mul(p, L.var("y"))) == 2


def test_lp_optimum():
    r = L.lp(["x", "y"], {"x": Q(1)}, [({"x": Q(1), "y": Q(1)}, Q(1))], [({"x": Q(2)}, Q(1))],
             maximize=True)
    assert r.feasible and r.value == Q(1, 2)


def test_smtlib_exists_script():
    text = smtlib.emit_exists(F.conj(F.eq(F.Add(x, y), Q(1, 2))))
    assert "(set-logic QF_NRA)" in text
    assert "(declare-fun x () Real)" in text
    assert "(assert (= (+ x y) (/ 1 2)))" in text
    assert text.rstrip().endswith("(get-model)")


def test_smtlib_forall_script():
    text = smtlib.emit_forall_exists({"x"}, F.leq(x, Q(1, 2)), {"y"},
                                     F.eq(F.Add(x, y), Q(1, 2)))
    assert "(forall ((x Real))" in text and "(exists ((y Real))" in text


def test_smtlib_model_parsing():
    model = smtlib.parse_model("(\n (define-fun x () Real (/ 1.0 3.0))\n"
                               " (define-fun y () Real 0.5)\n)")
    assert model == {"x": Q(1, 3), "y": Q(1, 2)}


def test_solver_spec_parsing():
    assert S.Solver.parse("builtin").backend == "builtin"
    ext = S.Solver.parse("external:/usr/bin/z3", 100)
    assert (ext.backend, ext.path, ext.timeout_ms) == ("external", "/usr/bin/z3", 100)
    with pytest.raises(ValueError):
        S.Solver.parse("z3")


def test_external_solver_missing_gives_unknown():
    """A broken external backend is consulted only as a fallback and never claims Sat."""
    solver = S.Solver.parse("external:/nonexistent/solver", 200)
    with S.using(solver):
        r = smtlib.run_external(smtlib.emit_exists(F.eq(x, Q(1, 2))), solver)
    assert r.unknown


def test_prob_range_resolves_chained_eliminations():
    """a + b + c + d is pinned even though presolve eliminates a via b and b via d."""
    a, b, c, d = (F.Var(n) for n in "abcd")
    phi = F.conj(F.eq(F.Add(a, b), Q(1, 3)), F.eq(F.Add(c, d), Q(2, 9)),
                 F.eq(F.Add(a, c), Q(1, 3)), F.eq(F.Add(b, d), Q(2, 9)))
    total = F.total([a, b, c, d])
    assert S.prob_range(phi, total) == (Q(5, 9), Q(5, 9))
    assert S.image_points(phi, [total]) == [(Q(5, 9),)]


def test_forall_coupling_merges_rows_with_equal_columns():
    a, b = F.Var("a"), F.Var("b")
    hyp = F.eq(F.Add(a, b), 1)
    left = [F.TaggedVar("a", 1, 1), F.TaggedVar("b", 2, 2)]
    assert S.forall_coupling(hyp, left, [Q(1)], {(1, 1), (2, 1)}).sat
    assert S.forall_coupling(hyp, left, [Q(1, 2), Q(1, 2)], {(1, 1), (2, 2)}).unsat


def test_fold_pins_is_equivalent_and_linearizes():
    phi = F.conj(F.eq(x, Q(1, 4)), F.eq(y, F.Mul(x, z)), F.leq(z, 1))
    folded = S.fold_pins(phi)
    assert not S.is_linear(phi) and S.is_linear(folded)
    for env in ({"x": Q(1, 4), "y": Q(1, 8), "z": Q(1, 2)}, {"x": Q(1, 4), "y": Q(1, 2), "z": Q(1, 2)}):
        assert F.holds(phi, env) == F.holds(folded, env)


def test_forall_coupling_pinned_total_allows_nonlinear_side():
    """One merged row whose total is pinned; the column side condition has products."""
    a, b, p, q, r = (F.Var(n) for n in "abpqr")
    hyp = F.conj(F.eq(F.Mul(a, b), F.Var("ab")), F.eq(F.Add(a, b), 1),
                 F.leq(0, a), F.leq(0, b))
    left = [F.TaggedVar("a", 1, 1), F.TaggedVar("b", 2, 2)]
    right = [F.TaggedVar("c1", 1, 1), F.TaggedVar("c2", 2, 2)]
    side = F.conj(F.eq(F.Var("c1"), F.Mul(p, q)), F.eq(F.Var("c2"), r),
                  F.eq(F.Add(F.Var("c1"), F.Var("c2")), 1),
                  *(F.leq(0, v) for v in (p, q, r)), *(F.leq(v, 1) for v in (p, q, r)))
    allowed = {(1, 1), (1, 2), (2, 1), (2, 2)}
    fast = S.forall_coupling(hyp, left, right, allowed, side)
    assert fast is not None and fast.sat
    concl, _ = S.coupling_formula(left, right, allowed)
    concl = F.conj(concl, side)
    u = F.free_vars(hyp)
    generic = S.solve_forall_exists(u, hyp, F.free_vars(concl) - u, concl)
    assert generic.status in ("sat", "unknown")
    bad = F.conj(side, F.eq(F.Var("c1"), 2))
    assert S.forall_coupling(hyp, left, right, allowed, bad).unsat
