import pytest

from conftest import finite_set
from nelson_workbench.category import arrow_category, terminal_category
from nelson_workbench.config import Budget
from nelson_workbench.errors import BudgetExceeded, StructureError
from nelson_workbench.presheaf import PsMap, Subobject
from nelson_workbench.topos import ToposCtx
from nelson_workbench.ultra import generated_filter, principal_ultrafilter
from nelson_workbench.ultrapower import (
    UltrapowerBundle,
    UltrapowerFunctor,
    UltrapowerPath,
    build_ultrapower,
    check_diagonal,
    check_heyting_functor,
    compare_paths,
    resolve_path,
    ultrapower_map,
)


def _finset_point(ctx, n=2):
    X = finite_set(ctx.base, n, "X", prefix="x")
    return X, principal_ultrafilter(ctx, ctx.global_elements(X)[0])


def test_paths_agree_on_finite_sets(finset):
    A = finite_set(finset.base, 2, "A")
    _, U = _finset_point(finset)
    sec = compare_paths(finset, A, U)
    assert sec.passed, sec.failures
    assert sec.notes["sizes"] == "[2]"


def test_paths_agree_over_z2(z2):
    R = z2.representable(0)
    X = z2.coproduct(R, z2.terminal()).apex
    U = principal_ultrafilter(z2, z2.global_elements(X)[0])
    assert compare_paths(z2, R, U).passed


def test_paths_fail_when_a_class_has_no_representative(finset, monkeypatch):
    A = finite_set(finset.base, 2, "A")
    _, U = _finset_point(finset)
    monkeypatch.setattr(UltrapowerBundle, "class_of", lambda self, c, k: 0)
    sec = compare_paths(finset, A, U)
    assert not sec.passed
    assert [c.name for c in sec.failures] == ["every class is evaluated"]


def test_explicit_principal_ultrapower_is_a(finset):
    A = finite_set(finset.base, 2, "A")
    _, U = _finset_point(finset)
    b = build_ultrapower(finset, A, U, UltrapowerPath.explicit)
    assert b.path == UltrapowerPath.explicit
    assert b.AtildeX.size() == 9
    assert b.result.size() == 2
    assert b.diag_map.is_iso()
    assert b.diag.is_full()


def test_shortcut_is_identity(finset):
    A = finite_set(finset.base, 3, "A")
    _, U = _finset_point(finset)
    b = build_ultrapower(finset, A, U, UltrapowerPath.shortcut)
    assert b.result == A
    assert b.representer is None


def test_top_filter_ultrapower_keeps_total_maps(finset):
    A = finite_set(finset.base, 2, "A")
    X = finite_set(finset.base, 2, "X", prefix="x")
    U = generated_filter(finset, X, [])
    b = build_ultrapower(finset, A, U)
    assert b.path == UltrapowerPath.explicit
    assert b.result.size() == 4
    assert b.diag.size() == 2
    assert b.diag_map.is_mono()


def test_shortcut_needs_principal_filter(finset):
    A = finite_set(finset.base, 2, "A")
    X = finite_set(finset.base, 2, "X", prefix="x")
    U = generated_filter(finset, X, [])
    with pytest.raises(StructureError):
        build_ultrapower(finset, A, U, UltrapowerPath.shortcut)
    with pytest.raises(StructureError):
        UltrapowerFunctor(finset, U, UltrapowerPath.shortcut)
    with pytest.raises(StructureError):
        compare_paths(finset, A, U)


def test_exponent_budget():
    ctx = ToposCtx(terminal_category(), Budget(max_exponent=2))
    A = finite_set(ctx.base, 2, "A")
    _, U = _finset_point(ctx)
    with pytest.raises(BudgetExceeded):
        build_ultrapower(ctx, A, U, UltrapowerPath.explicit)
    assert resolve_path(ctx, A, U, UltrapowerPath.auto) == UltrapowerPath.shortcut


def test_functor_auto_path(finset):
    X, U = _finset_point(finset)
    assert UltrapowerFunctor(finset, U).path == UltrapowerPath.shortcut
    V = generated_filter(finset, X, [])
    assert UltrapowerFunctor(finset, V).path == UltrapowerPath.explicit


def test_lifted_maps_compose(finset):
    A = finite_set(finset.base, 2, "A")
    X = finite_set(finset.base, 2, "X", prefix="x")
    F = UltrapowerFunctor(finset, generated_filter(finset, X, []))
    maps = finset.hom_set(A, A)
    for f in maps:
        for g in maps:
            assert F.lift(f.then(g)) == F.lift(f).then(F.lift(g))


def test_ultrapower_map_rejects_mixed_bundles(finset):
    A = finite_set(finset.base, 2, "A")
    X, U = _finset_point(finset)
    V = generated_filter(finset, X, [])
    src = build_ultrapower(finset, A, U, UltrapowerPath.explicit)
    tgt = build_ultrapower(finset, A, V)
    with pytest.raises(StructureError):
        ultrapower_map(finset, PsMap.identity(A), src, tgt)


def test_diagonal_checks(finset):
    A = finite_set(finset.base, 2, "A")
    X, U = _finset_point(finset)
    F = UltrapowerFunctor(finset, U, UltrapowerPath.explicit)
    assert check_diagonal(finset, F, [A], flags_ultra=True).passed
    G = UltrapowerFunctor(finset, generated_filter(finset, X, []))
    sec = check_diagonal(finset, G, [A], flags_ultra=False)
    assert sec.passed
    assert sec.notes["d_U(Ω) is an isomorphism"] == "false"


def test_heyting_functor_for_principal_filter(finset):
    A = finite_set(finset.base, 2, "A")
    one = finset.terminal()
    _, U = _finset_point(finset)
    F = UltrapowerFunctor(finset, U, UltrapowerPath.explicit)
    maps = finset.hom_set(A, A) + [finset.to_terminal(A)]
    assert check_heyting_functor(finset, F, [A, one], maps).passed


def test_heyting_functor_checks_equalizers_and_pullbacks(finset):
    A = finite_set(finset.base, 2, "A")
    _, U = _finset_point(finset)
    F = UltrapowerFunctor(finset, U, UltrapowerPath.explicit)
    sec = check_heyting_functor(finset, F, [A], finset.hom_set(A, A), limit=4)
    names = [c.name for c in sec.checks]
    assert "equalizer of A => A" in names
    assert "pullback of A -> A <- A" in names
    assert sec.passed, sec.failures


def test_heyting_functor_needs_groupoid_base():
    ctx = ToposCtx(arrow_category())
    one = ctx.terminal()
    U = principal_ultrafilter(ctx, ctx.global_elements(one)[0], verify=False)
    F = UltrapowerFunctor(ctx, U)
    sec = check_heyting_functor(ctx, F, [one])
    assert not sec.passed
    assert sec.checks[0].name == "base is a groupoid"


def test_embed_full_subobject(finset):
    A = finite_set(finset.base, 2, "A")
    X = finite_set(finset.base, 2, "X", prefix="x")
    F = UltrapowerFunctor(finset, generated_filter(finset, X, []))
    assert F.embed(Subobject.full(A)).is_full()
    assert F.embed(Subobject.empty(A)).is_empty()
