import pytest
from hypothesis import given
from hypothesis import strategies as st

from conftest import finite_set
from nelson_workbench.category import arrow_category, cyclic_group
from nelson_workbench.doctrine import (
    HeytingOps,
    PullbackSquare,
    SubDoctrine,
    check_adjunctions,
    check_beck_chevalley,
    check_de_morgan,
    check_frobenius,
    check_generic_predicate,
    check_heyting_laws,
    check_quantifier_formulas,
    check_substitution_heyting,
    exists_along,
    forall_along,
    is_pullback,
    pullback_square,
    pullback_squares,
    sub_heyting,
    substitute,
)
from nelson_workbench.errors import NotAPullbackError, ShapeError
from nelson_workbench.presheaf import PsMap, Subobject
from nelson_workbench.topos import ToposCtx

CTX = ToposCtx(cyclic_group(2))
R = CTX.representable(0)
ONE = CTX.terminal()
X = CTX.coproduct(R, ONE).apex
SUBS_X = CTX.subobjects(X)
OPS = HeytingOps(X)

ARROW = ToposCtx(arrow_category())
OMEGA_ARROW = ARROW.omega().obj
SUBS_OMEGA = ARROW.subobjects(OMEGA_ARROW)
ARROW_OPS = HeytingOps(OMEGA_ARROW)

subs_x = st.sampled_from(SUBS_X)
subs_omega = st.sampled_from(SUBS_OMEGA)


@given(subs_omega, subs_omega, subs_omega)
def test_residuation_over_arrow(a, x, b):
    assert ARROW_OPS.meet(a, x).leq(b) == x.leq(ARROW_OPS.implies(a, b))


@given(subs_omega)
def test_double_negation_is_inflationary(a):
    assert a.leq(ARROW_OPS.negate(ARROW_OPS.negate(a)))


@given(subs_x, subs_x)
def test_lattice_absorption(a, b):
    assert OPS.join(a, OPS.meet(a, b)) == a
    assert OPS.meet(a, OPS.join(a, b)) == a


@given(subs_x)
def test_excluded_middle_over_a_group(a):
    assert OPS.join(a, OPS.negate(a)) == OPS.top()


def test_excluded_middle_fails_over_arrow():
    assert any(ARROW_OPS.join(a, ARROW_OPS.negate(a)) != ARROW_OPS.top() for a in SUBS_OMEGA)


@given(subs_x, st.sampled_from(CTX.subobjects(ONE)))
def test_exists_left_adjoint_to_substitution(s, t):
    f = CTX.to_terminal(X)
    assert exists_along(CTX, f, s).leq(t) == s.leq(substitute(CTX, f, t))
    assert substitute(CTX, f, t).leq(s) == t.leq(forall_along(CTX, f, s))


def test_heyting_laws_section():
    sec = check_heyting_laws(CTX, X)
    assert sec.passed
    assert sec.notes["subobjects"] == "4"


def test_sub_doctrine_suites_pass():
    D = SubDoctrine(CTX)
    maps = CTX.hom_set(X, X) + CTX.hom_set(X, ONE) + CTX.hom_set(R, X)
    assert check_adjunctions(CTX, D, maps).passed
    assert check_frobenius(CTX, D, maps).passed
    assert check_substitution_heyting(CTX, D, maps).passed
    assert check_generic_predicate(CTX, D, [X, R, ONE]).passed
    assert check_quantifier_formulas(CTX, maps).passed
    assert check_de_morgan(CTX, maps).passed


def test_beck_chevalley_on_pullbacks():
    D = SubDoctrine(CTX)
    maps = CTX.hom_set(R, X) + CTX.hom_set(ONE, X)
    squares = pullback_squares(CTX, maps)
    assert squares
    for sq in squares:
        assert is_pullback(CTX, sq) is None
        assert check_beck_chevalley(CTX, D, sq).passed


def test_beck_chevalley_over_arrow():
    A = OMEGA_ARROW
    f = ARROW.to_terminal(A)
    sq = pullback_square(ARROW, f, f)
    assert check_beck_chevalley(ARROW, SubDoctrine(ARROW), sq).passed


def test_non_pullback_square_is_rejected(finset):
    A = finite_set(finset.base, 2, "A")
    ident = PsMap.identity(A)
    bang = finset.to_terminal(A)
    sq = PullbackSquare(top=ident, left=ident, right=bang, bottom=bang)
    assert is_pullback(finset, sq) is not None
    with pytest.raises(NotAPullbackError):
        check_beck_chevalley(finset, SubDoctrine(finset), sq)


def test_operations_need_matching_ambients():
    with pytest.raises(ShapeError):
        OPS.meet(Subobject.full(X), Subobject.full(R))
    with pytest.raises(ShapeError):
        substitute(CTX, CTX.to_terminal(X), Subobject.full(X))


def test_forall_over_arrow_is_not_complement_of_exists():
    f = ARROW.to_terminal(OMEGA_ARROW)
    assert not check_de_morgan(ARROW, [f]).passed


def test_sub_heyting_matches_ops():
    ops = sub_heyting(CTX, X)
    assert ops.top() == OPS.top()
    assert ops.bottom() == Subobject.empty(X)
