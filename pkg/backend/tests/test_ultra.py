import pytest

from conftest import finite_set
from nelson_workbench.errors import ShapeError, StructureError
from nelson_workbench.presheaf import Subobject
from nelson_workbench.ultra import (
    FilterKind,
    InternalFilter,
    check_forms_agree,
    classify_filter,
    enumerate_internal_ultrafilters,
    extend_to_ultrafilter,
    filter_from_subobject,
    generated_filter,
    is_k_finite,
    k_finite_object,
    principal_ultrafilter,
)


@pytest.mark.parametrize("n", [1, 2, 3])
def test_finite_set_has_one_ultrafilter_per_point(finset, n):
    X = finite_set(finset.base, n, "X", prefix="x")
    found = enumerate_internal_ultrafilters(finset, X)
    assert len(found) == n
    assert all(U.kind == FilterKind.principal for U in found)
    assert all(U.flags.is_ultra for U in found)


def test_regular_z2_set_has_no_ultrafilter(z2):
    assert enumerate_internal_ultrafilters(z2, z2.representable(0)) == []


def test_ultrafilter_on_coproduct_with_a_point(z2):
    X = z2.coproduct(z2.representable(0), z2.terminal()).apex
    found = enumerate_internal_ultrafilters(z2, X)
    assert len(found) == 1
    assert found[0].describe() == "principal at ((1, *))"


def test_principal_flags(finset):
    X = finite_set(finset.base, 2, "X", prefix="x")
    x = finset.global_elements(X)[0]
    U = principal_ultrafilter(finset, x)
    assert (U.flags.is_filter, U.flags.is_proper, U.flags.is_ultra) == (True, True, True)
    assert U.member(Subobject(X, (frozenset({0}),)))
    assert not U.member(Subobject(X, (frozenset({1}),)))
    assert check_forms_agree(finset, U).passed


def test_top_only_filter_is_proper_not_ultra(finset):
    X = finite_set(finset.base, 2, "X", prefix="x")
    U = generated_filter(finset, X, [])
    flags = classify_filter(finset, U)
    assert (flags.is_filter, flags.is_proper, flags.is_ultra) == (True, True, False)
    assert flags.witnesses
    assert check_forms_agree(finset, U).passed


def test_filter_missing_top_is_not_a_filter(finset):
    X = finite_set(finset.base, 2, "X", prefix="x")
    P = finset.power_object(X)
    U = filter_from_subobject(finset, X, Subobject.empty(P.obj))
    flags = classify_filter(finset, U)
    assert not flags.is_filter
    assert not flags.is_ultra
    assert flags.to_section("flags").notes["filter"] == "false"


def test_improper_filter(finset):
    X = finite_set(finset.base, 2, "X", prefix="x")
    U = generated_filter(finset, X, [Subobject.empty(X)])
    flags = classify_filter(finset, U)
    assert flags.is_filter
    assert not flags.is_proper


def test_extend_generated_filter(finset):
    X = finite_set(finset.base, 3, "X", prefix="x")
    F = generated_filter(finset, X, [Subobject(X, (frozenset({1, 2}),)),
                                     Subobject(X, (frozenset({1}),))])
    U = extend_to_ultrafilter(finset, F)
    assert U.kind == FilterKind.principal
    assert U.point.components == ((1,),)
    assert U.flags.is_ultra


def test_extend_fails_without_points(z2):
    R = z2.representable(0)
    F = generated_filter(z2, R, [])
    with pytest.raises(StructureError):
        extend_to_ultrafilter(z2, F)


def test_membership_checks_ambient(finset):
    X = finite_set(finset.base, 2, "X", prefix="x")
    Y = finite_set(finset.base, 3, "Y", prefix="y")
    U = generated_filter(finset, X, [])
    with pytest.raises(ShapeError):
        U.member(Subobject.full(Y))


def test_extensional_member_needs_context(finset):
    X = finite_set(finset.base, 1, "X", prefix="x")
    P = finset.power_object(X)
    U = InternalFilter(X, FilterKind.extensional, extensional=Subobject.full(P.obj))
    with pytest.raises(ValueError):
        U.member(Subobject.full(X))
    assert U.member(Subobject.full(X), finset)


def test_k_finite(finset, z2):
    A = finite_set(finset.base, 3, "A")
    K = k_finite_object(finset, A)
    assert K.KA.is_full()
    assert is_k_finite(finset, A)
    assert is_k_finite(z2, z2.representable(0))
