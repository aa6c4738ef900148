from fractions import Fraction as Q

import pytest

from gradprob import relations as R
from gradprob import target as tgt
from gradprob.checker import (TypeCheckError, typecheck_gplc, typecheck_splc,
                              typecheck_tplc, typeof_value_gplc)
from gradprob.elaborate import elaborate
from gradprob.gtypes import BOOL, DYN, REAL, UNKNOWN, Fun, GDist, dirac
from gradprob.parser import parse
from helpers import program


def G(*entries):
    return GDist(tuple(entries))


def ty(text):
    return typecheck_gplc(parse(text))


def kind(text):
    with pytest.raises(TypeCheckError) as e:
        typecheck_gplc(parse(text))
    return e.value.diagnostic.kind


# ------------------------------------------------------------ source checker


def test_choice_scales_and_sums():
    assert ty("1 (+ 1/3 +) true") == G((REAL, Q(1, 3)), (BOOL, Q(2, 3)))
    assert ty("(1 (+ 1/2 +) 2) (+ 2/3 +) true") == G((REAL, Q(1, 3)), (REAL, Q(1, 3)),
                                                      (BOOL, Q(1, 3)))


def test_unknown_choice_gives_unknown_probabilities():
    assert ty("1 (+ ? +) true") == G((REAL, UNKNOWN), (BOOL, UNKNOWN))


def test_lambda_and_application():
    assert typeof_value_gplc(parse("\\x:Real. x + 1")) == Fun(REAL, dirac(REAL))
    assert ty("(\\x:Real. x + 1) 2") == dirac(REAL)
    assert ty("(\\x:?. x + 1) true") == dirac(REAL)  # consistent, fails only at runtime


def test_let_types_body_per_entry():
    assert R.reorder(ty("let a = 1 (+ 1/4 +) 2 in a + 10"), G((REAL, 1)))


def test_ascriptions():
    assert ty("true :: ?") == dirac(DYN)
    assert ty("(1 (+ 1/3 +) true) :: {Real^?, Bool^?}") == G((REAL, UNKNOWN), (BOOL, UNKNOWN))


def test_diagnostics():
    assert kind("x") == "unbound var"
    assert kind("1 2") == "non-function application"
    assert kind("true + 1") == "inconsistency"
    assert kind("(1 (+ 1/3 +) true) :: {Real^2/3, Bool^1/3}") == "inconsistency"
    assert kind("if true then 1 else false") == "branch mismatch"


def test_diagnostic_carries_span():
    with pytest.raises(TypeCheckError) as e:
        typecheck_gplc(parse("let a = 1 in\n  true + a"))
    assert str(e.value.diagnostic.span) == "2:3"


def test_external_call_typechecks():
    text = program("external_call.gplc")
    assert typecheck_gplc(parse(text)) == G((BOOL, Q(95, 100)), (BOOL, UNKNOWN), (REAL, UNKNOWN))


def test_splc_rejects_gradual_programs():
    with pytest.raises(TypeCheckError):
        typecheck_splc(parse("1 (+ ? +) 2"))
    assert typecheck_splc(parse("1 (+ 1/2 +) 2")) == G((REAL, Q(1, 2)), (REAL, Q(1, 2)))


def test_splc_requires_static_equality_not_consistency():
    with pytest.raises(TypeCheckError):
        typecheck_splc(parse("(\\x:Real. x) true"))


# ---------------------------------------------------------------- elaboration


def elab(text):
    return elaborate(parse(text))


@pytest.mark.parametrize("text", [
    "1 (+ 1/3 +) true",
    "(\\x:?. x + 1) 2",
    "let a = 1 (+ 1/4 +) 2 in a + 10",
    "(1 (+ 1/3 +) true) :: {?^1/3, Bool^2/3}",
    "if true then 1 else 2",
    "let y = 1 (+ ? +) true in (\\x:?. x :: Real) y",
])
def test_elaboration_preserves_types(text):
    out = elab(text)
    assert out.ty == ty(text)
    assert R.reorder(typecheck_tplc(out.target), R.lift(out.ty))


def test_elaborated_values_are_ascribed():
    out = elab("1")
    assert isinstance(out.target, tgt.Asc)
    assert out.target.ev == REAL and out.target.ty == REAL


def test_elaboration_uses_reserved_names():
    out = elab("(\\x:?. x + 1) 2")
    names = tgt.free_term_vars(out.target)
    assert names == set()


def test_elaboration_is_deterministic_per_session():
    from gradprob import formula as F
    with F.session():
        a = elab("let y = 1 (+ ? +) true in (\\x:?. x :: Real) y")
    with F.session():
        b = elab("let y = 1 (+ ? +) true in (\\x:?. x :: Real) y")
    assert a == b


def test_type_errors_propagate_through_elaboration():
    with pytest.raises(TypeCheckError):
        elab("true + 1")
