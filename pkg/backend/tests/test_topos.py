import pytest

from conftest import finite_set
from nelson_workbench.category import (
    arrow_category,
    cyclic_group,
    groupoid_category,
    terminal_category,
)
from nelson_workbench.config import Budget
from nelson_workbench.errors import BudgetExceeded, ShapeError
from nelson_workbench.presheaf import PsMap, Subobject
from nelson_workbench.topos import LimitKind, ToposCtx
from nelson_workbench.validate import validate_map, validate_presheaf


def test_omega_sizes(finset, z2):
    assert finset.omega().obj.size() == 2
    assert z2.omega().obj.size() == 2
    arrow = ToposCtx(arrow_category())
    Om = arrow.omega().obj
    assert [Om.size(c) for c in range(2)] == [2, 3]
    assert validate_presheaf(Om).ok


def test_memoized_constructions_are_shared(z2):
    assert z2.omega() is z2.omega()
    R = z2.representable(0)
    assert z2.power_object(R) is z2.power_object(R)


def test_classify_round_trip_over_arrow():
    ctx = ToposCtx(arrow_category())
    Om = ctx.omega().obj
    for S in ctx.subobjects(Om):
        chi = ctx.classify(S)
        assert validate_map(chi).ok
        assert ctx.subobject_of(chi) == S


@pytest.mark.parametrize("n", [0, 1, 2, 3])
def test_power_object_size(finset, n):
    A = finite_set(finset.base, n, "A")
    P = finset.power_object(A)
    assert P.obj.size() == 2 ** n
    assert P.membership.size() == (n * 2 ** (n - 1) if n else 0)


def test_exponential_and_hom_sizes(finset):
    A = finite_set(finset.base, 2, "A")
    B = finite_set(finset.base, 3, "B", prefix="b")
    assert finset.exponential(A, B).obj.size() == 9
    assert len(finset.hom_set(A, B)) == 9
    assert finset.partial_map_representer(A).obj.size() == 3


def test_curry_then_eval_recovers_map(finset):
    C = finite_set(finset.base, 2, "C", prefix="c")
    A = finite_set(finset.base, 2, "A")
    B = finite_set(finset.base, 2, "B", prefix="b")
    prod = finset.product(C, A)
    E = finset.exponential(A, B)
    for h in finset.hom_set(prod.apex, B):
        curried = finset.curry(h, C, A)
        back = finset.tuple_map(finset.product(E.obj, A),
                                [prod.legs[0].then(curried), prod.legs[1]])
        assert back.then(E.eval) == h


def test_global_elements_of_coproduct(z2):
    R = z2.representable(0)
    one = z2.terminal()
    assert z2.global_elements(R) == []
    X = z2.coproduct(R, one).apex
    assert X.carrier[0][0] == (0, "g0")
    assert len(z2.global_elements(X)) == 1


def test_limits(finset):
    A = finite_set(finset.base, 3, "A")
    B = finite_set(finset.base, 2, "B", prefix="b")
    prod = finset.finite_limit(LimitKind.product, [A, B])
    assert prod.apex.size() == 6
    assert prod.apex.label(0, 0) == ("e0", "b0")
    maps = finset.hom_set(A, B)
    f, g = maps[0], maps[1]
    eq = finset.equalizer(f, g)
    assert eq.legs[0].is_mono()
    assert all(f(0, eq.legs[0](0, i)) == g(0, eq.legs[0](0, i)) for i in range(eq.apex.size()))
    pb = finset.pullback(f, f)
    assert pb.apex.size() == 9
    with pytest.raises(ShapeError):
        finset.finite_limit(LimitKind.equalizer, [f])


def test_coequalizer_identifies_points(finset):
    A = finite_set(finset.base, 3, "A")
    p0, p1, _ = finset.global_elements(A)
    Q, q = finset.coequalizer(p0, p1)
    assert Q.size() == 2
    assert q(0, 0) == q(0, 1)
    assert q.is_epi()


def test_image_factorization(finset):
    A = finite_set(finset.base, 3, "A")
    f = finset.to_terminal(A)
    epi, mono = finset.image_factorization(f)
    assert epi.is_epi()
    assert mono.is_full()
    assert finset.image(f, Subobject.empty(A)).is_empty()


def test_extend_classifies_partial_map(finset):
    A = finite_set(finset.base, 2, "A")
    B = finite_set(finset.base, 2, "B", prefix="b")
    D = Subobject(B, (frozenset({0}),))
    Dobj, _ = D.as_presheaf()
    f = PsMap(Dobj, A, ((1,),))
    R = finset.partial_map_representer(A)
    ext = finset.extend(D, f)
    assert R.value(0, ext(0, 0)) == 1
    assert R.value(0, ext(0, 1)) is None


def test_power_object_budget():
    ctx = ToposCtx(terminal_category(), Budget(max_elements=4))
    A = finite_set(ctx.base, 3, "A")
    with pytest.raises(BudgetExceeded):
        ctx.power_object(A)


def test_mixed_bases_rejected(finset, z2):
    A = finite_set(finset.base, 1, "A")
    with pytest.raises(ShapeError):
        z2.power_object(A)


def test_name_of_relation(finset):
    A = finite_set(finset.base, 2, "A")
    B = finite_set(finset.base, 2, "B", prefix="b")
    prod = finset.product(A, B)
    R = Subobject(prod.apex, (frozenset({0, 3}),))
    name = finset.name_of(R, A, B)
    assert name(0, 0) != name(0, 1)
    assert name.target == finset.power_object(A).obj


@pytest.mark.parametrize("base", [
    terminal_category(), cyclic_group(2), cyclic_group(3), arrow_category(), groupoid_category(2),
], ids=lambda b: b.name)
def test_topos_laws_across_bases(base):
    ctx = ToposCtx(base)
    objects = [ctx.terminal(), ctx.representable(0), ctx.omega().obj]
    for A in objects:
        assert validate_presheaf(ctx.power_object(A).obj).ok
        subs = ctx.subobjects(A)
        for S in subs:
            assert ctx.subobject_of(ctx.classify(S)) == S
        assert len(ctx.global_elements(ctx.power_object(A).obj)) == len(subs)
        for B in objects[:2]:
            E = ctx.exponential(A, B)
            assert len(ctx.global_elements(E.obj)) == len(ctx.hom_set(A, B))


def test_intersect_tilde_keeps_agreement(finset):
    A = finite_set(finset.base, 2, "A")
    R = finset.partial_map_representer(A)
    prod = finset.product(R.obj, R.obj)
    meet = finset.intersect_tilde(A)
    for k in range(prod.apex.size(0)):
        v1 = R.value(0, prod.legs[0](0, k))
        v2 = R.value(0, prod.legs[1](0, k))
        assert R.value(0, meet(0, k)) == (v1 if v1 == v2 else None)


def test_representer_map_pushes_values(finset):
    A = finite_set(finset.base, 2, "A")
    B = finite_set(finset.base, 3, "B", prefix="b")
    RA, RB = finset.partial_map_representer(A), finset.partial_map_representer(B)
    for f in finset.hom_set(A, B):
        g = finset.representer_map(f)
        for k in range(RA.obj.size(0)):
            v = RA.value(0, k)
            assert RB.value(0, g(0, k)) == (None if v is None else f(0, v))


def test_exponential_map(finset):
    X = finite_set(finset.base, 2, "X", prefix="x")
    A = finite_set(finset.base, 2, "A")
    E = finset.exponential(X, A)
    assert finset.exponential_map(X, PsMap.identity(A)) == PsMap.identity(E.obj)
    for f in finset.hom_set(A, finset.terminal()):
        assert validate_map(finset.exponential_map(X, f)).ok


def test_subobject_names_are_distinct(z2):
    X = z2.coproduct(z2.representable(0), z2.terminal()).apex
    subs = z2.subobjects(X)
    names = {z2.subobject_name(S).components for S in subs}
    assert len(names) == len(subs) == len(z2.global_elements(z2.power_object(X).obj))
