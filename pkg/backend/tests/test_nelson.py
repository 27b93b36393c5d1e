import pytest

from conftest import finite_set
from nelson_workbench.category import arrow_category
from nelson_workbench.doctrine import (
    check_adjunctions,
    check_beck_chevalley,
    exists_along,
    forall_along,
    pullback_squares,
)
from nelson_workbench.errors import ShapeError, StructureError
from nelson_workbench.nelson import (
    ExternalPredicate,
    StandardDoctrine,
    StandardEmbedding,
    build_nelson,
    check_connectives_st,
    check_definition,
    check_quantifier_preservation_gives_transfer,
    check_sigma_adjunction,
    check_sigma_quantifiers_st,
    check_standardisation_functor,
    check_substitution_st,
    corrupt_sigma,
    diamond,
    equiv_st,
    export_subst_doctrine,
    leq_st,
    sigma_exists,
    st_exists,
    st_forall,
    standard_maps,
    standardise,
    standardise_is_unique,
)
from nelson_workbench.presheaf import Subobject
from nelson_workbench.topos import ToposCtx
from nelson_workbench.ultra import generated_filter, principal_ultrafilter
from nelson_workbench.ultrapower import UltrapowerPath


def _principal(ctx, path=UltrapowerPath.explicit):
    A = finite_set(ctx.base, 2, "A")
    X = finite_set(ctx.base, 2, "X", prefix="x")
    U = principal_ultrafilter(ctx, ctx.global_elements(X)[0])
    return A, build_nelson(ctx, X, U, family=[A, ctx.terminal()], path=path)


def _proper(ctx, check=True):
    A = finite_set(ctx.base, 2, "A")
    X = finite_set(ctx.base, 2, "X", prefix="x")
    U = generated_filter(ctx, X, [])
    return A, build_nelson(ctx, X, U, family=[A, ctx.terminal()], allow_proper=True, check=check)


def test_principal_structure_builds(finset):
    A, N = _principal(finset)
    assert N.path == UltrapowerPath.explicit
    assert N.sigma(A).pred.is_full()
    assert not N.is_corrupted()


def test_non_groupoid_base_is_rejected():
    ctx = ToposCtx(arrow_category())
    one = ctx.terminal()
    U = principal_ultrafilter(ctx, ctx.global_elements(one)[0], verify=False)
    with pytest.raises(StructureError, match="groupoid"):
        build_nelson(ctx, one, U)


def test_proper_filter_needs_permission(finset):
    X = finite_set(finset.base, 2, "X", prefix="x")
    U = generated_filter(finset, X, [])
    with pytest.raises(StructureError, match="ultrafilter"):
        build_nelson(finset, X, U)


def test_filter_must_live_on_index(finset):
    X = finite_set(finset.base, 2, "X", prefix="x")
    Y = finite_set(finset.base, 3, "Y", prefix="y")
    U = generated_filter(finset, Y, [])
    with pytest.raises(ShapeError):
        build_nelson(finset, X, U)


def test_proper_structure_sigma_is_constants(finset):
    A, N = _proper(finset)
    assert N.star(A).size() == 4
    assert N.sigma(A).pred.size() == 2
    assert len(N.predicates(A)) == 16


def test_proper_structure_breaks_i_heyting(finset):
    A, N = _proper(finset)
    full = check_definition(N, [A, finset.terminal()], heyting=True)
    assert not full.passed
    assert any(c.name.startswith("join") for c in full.failures)
    assert check_definition(N, [A, finset.terminal()], heyting=False).passed


def test_corrupted_sigma_fails_definition(finset):
    A, N = _principal(finset, path=UltrapowerPath.shortcut)
    M = corrupt_sigma(N)
    assert M.is_corrupted()
    sec = check_definition(M, [A])
    assert [c.name for c in sec.failures][0] == "σ at 1 is top"
    assert check_definition(N, [A]).passed


def test_standardisation_on_proper_structure(finset):
    A, N = _proper(finset)
    for W in N.predicates(A):
        S = standardise(N, W)
        assert equiv_st(N, N.embed(S), W)
        assert standardise_is_unique(N, W)
        assert equiv_st(N, diamond(N, W), W)


def test_leq_st_ignores_nonstandard_part(finset):
    A, N = _proper(finset)
    sigma = N.sigma(A)
    top = ExternalPredicate(A, N.ops(A).top())
    assert leq_st(N, top, sigma)
    assert not top.pred.leq(sigma.pred)


def test_sigma_quantifier_needs_matching_source(finset):
    A, N = _proper(finset)
    f = finset.to_terminal(A)
    bad = ExternalPredicate(finset.terminal(), N.ops(finset.terminal()).top())
    with pytest.raises(ShapeError):
        sigma_exists(N, f, bad)


def test_st_order_suites_on_proper_structure(finset):
    A, N = _proper(finset)
    objects = [A, finset.terminal()]
    maps = standard_maps(finset, objects)
    assert check_connectives_st(N, objects).passed
    assert check_substitution_st(N, maps).passed
    assert check_sigma_quantifiers_st(N, maps).passed
    assert check_sigma_adjunction(N, maps).passed
    assert check_standardisation_functor(N, objects, maps).passed


def test_quantifier_preservation_gives_transfer(finset):
    A, N = _principal(finset)
    maps = standard_maps(finset, [A, finset.terminal()])
    sec = check_quantifier_preservation_gives_transfer(N, maps, assume_premise=True)
    assert sec.passed
    assert sec.notes["premise holds"] == "true"


def test_standard_doctrine_laws(z2):
    R = z2.representable(0)
    X = z2.coproduct(R, z2.terminal()).apex
    U = principal_ultrafilter(z2, z2.global_elements(X)[0])
    N = build_nelson(z2, X, U, family=[R, z2.terminal()])
    D = StandardDoctrine(N)
    maps = standard_maps(z2, [R, z2.terminal()])
    assert check_adjunctions(z2, D, maps).passed
    for sq in pullback_squares(z2, maps):
        assert check_beck_chevalley(z2, D, sq).passed
    f = z2.to_terminal(R)
    for S in z2.subobjects(R):
        assert st_exists(N, f, S) == exists_along(z2, f, S)
        assert st_forall(N, f, S) == forall_along(z2, f, S)
    assert isinstance(export_subst_doctrine(N), StandardDoctrine)
    emb = StandardEmbedding(N)
    assert emb.check([R], maps, quantifiers=True).passed
    assert emb.check_split([R]).passed
    assert emb.factor_through_internal([R]).passed


def test_embedding_of_subobject_over_proper_structure(finset):
    A, N = _proper(finset)
    S = Subobject(A, (frozenset({0}),))
    assert N.embed(S).pred.size() == 1
    assert StandardEmbedding(N).check_split([A]).passed
