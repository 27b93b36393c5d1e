import pytest

from conftest import finite_set
from nelson_workbench.axioms import (
    IdealisationInstance,
    Interpretation,
    adequate_ultrapower,
    check_idealisation,
    check_standardisation,
    check_transfer,
    evaluate,
    holds,
    realize_point,
    soundness_suite,
    transfer_section,
)
from nelson_workbench.errors import ShapeError, SortError, StructureError
from nelson_workbench.nelson import ExternalPredicate, build_nelson
from nelson_workbench.presheaf import Subobject
from nelson_workbench.ultra import (
    FilterKind,
    enumerate_internal_ultrafilters,
    generated_filter,
    principal_ultrafilter,
)
from nelson_workbench.ultrapower import UltrapowerPath


def _structure(ctx, proper=False, path=UltrapowerPath.auto):
    A = finite_set(ctx.base, 2, "A")
    X = finite_set(ctx.base, 2, "X", prefix="x")
    if proper:
        U = generated_filter(ctx, X, [])
    else:
        U = principal_ultrafilter(ctx, ctx.global_elements(X)[0])
    N = build_nelson(ctx, X, U, family=[A, ctx.terminal()], path=path, allow_proper=proper)
    return A, N


def _interp(N, A):
    return Interpretation(N, {"A": A}).declare("P", ("A",), Subobject(A, (frozenset({0}),)))


def test_closed_formulas(finset):
    A, N = _structure(finset)
    I = _interp(N, A)
    assert holds(N, "exists x:A. P(x)", I)
    assert not holds(N, "forall x:A. P(x)", I)
    assert holds(N, "forall x:A. st(x)", I)
    assert holds(N, "forall x:A. exists^st y:A. x = y", I)


def test_open_formula_lives_over_context(finset):
    A, N = _structure(finset)
    phi = evaluate(N, "P(x)", _interp(N, A), env=[("x", "A")])
    assert phi.pred.size() == 1
    both = evaluate(N, "P(x) & ~P(y)", _interp(N, A), env=[("x", "A"), ("y", "A")])
    assert both.pred.size() == 1


def test_proper_structure_has_nonstandard_elements(finset):
    A, N = _structure(finset, proper=True)
    I = _interp(N, A)
    assert holds(N, "exists x:A. ~st(x)", I)
    assert not holds(N, "forall x:A. exists^st y:A. x = y", I)
    assert holds(N, "forall^st x:A. exists^st y:A. x = y", I)


@pytest.mark.parametrize("text", [
    "exists x:A. Q(x)",
    "exists x:C. true",
    "exists x:A. P(x, x)",
    "P(y)",
])
def test_sort_errors(finset, text):
    A, N = _structure(finset)
    with pytest.raises(SortError):
        holds(N, text, _interp(N, A))


def test_st_is_reserved(finset):
    A, N = _structure(finset)
    with pytest.raises(SortError):
        Interpretation(N, {"A": A}).declare("st", ("A",), Subobject.full(A))


def test_declared_subobject_must_match_sorts(finset):
    A, N = _structure(finset)
    with pytest.raises(SortError):
        Interpretation(N, {"A": A}).declare("P", ("A", "A"), Subobject.full(A))


def test_transfer_on_principal_structure(finset):
    A, N = _structure(finset, path=UltrapowerPath.explicit)
    f = finset.to_terminal(A)
    for S in finset.subobjects(A):
        assert check_transfer(N, f, S).passed
    sec = transfer_section(N, f)
    assert sec.passed
    assert sec.notes["subobjects"] == "4"


def test_transfer_needs_subobject_of_source(finset):
    A, N = _structure(finset)
    f = finset.to_terminal(A)
    with pytest.raises(ShapeError):
        check_transfer(N, f, Subobject.full(finset.terminal()))


def test_standardisation_on_proper_structure(finset):
    A, N = _structure(finset, proper=True)
    rep = check_standardisation(N, A)
    assert rep.passed
    assert rep.sections[0].name == "existence and uniqueness"
    assert rep.sections[0].notes["external predicates"] == "16"


def test_standardisation_sample_must_be_over_object(finset):
    A, N = _structure(finset, proper=True)
    one = finset.terminal()
    with pytest.raises(ShapeError):
        check_standardisation(N, A, sample=[ExternalPredicate(one, N.ops(one).top())])


@pytest.mark.parametrize("n,size", [(1, 4), (2, 16)])
def test_adequate_index_size(finset, n, size):
    B = finite_set(finset.base, n, "B", prefix="b")
    X, U, N = adequate_ultrapower(finset, B)
    assert X.size() == size
    assert U.kind == FilterKind.principal
    assert N.adequate is not None


def test_realize_point_recovers_each_ultrafilter(finset):
    B = finite_set(finset.base, 2, "B", prefix="b")
    _, _, N = adequate_ultrapower(finset, B)
    found = enumerate_internal_ultrafilters(finset, B)
    assert len(found) == 2
    for V in found:
        xi = realize_point(N, V)
        assert xi.components == V.point.components


def test_realize_point_needs_adequate_structure(finset):
    A, N = _structure(finset)
    V = enumerate_internal_ultrafilters(finset, A)[0]
    with pytest.raises(StructureError):
        realize_point(N, V)


@pytest.mark.slow
def test_idealisation_for_every_relation(finset):
    A = finite_set(finset.base, 2, "A")
    B = finite_set(finset.base, 2, "B", prefix="b")
    _, _, N = adequate_ultrapower(finset, B)
    rel = finset.product(A, B).apex
    for R in finset.subobjects(rel):
        assert check_idealisation(N, IdealisationInstance(A, B, R)).passed


def test_idealisation_notes(finset):
    A = finite_set(finset.base, 2, "A")
    B = finite_set(finset.base, 2, "B", prefix="b")
    _, _, N = adequate_ultrapower(finset, B)
    rel = finset.product(A, B).apex
    full = check_idealisation(N, IdealisationInstance(A, B, Subobject.full(rel))).sections[0]
    assert full.name == "K-finite idealisation"
    assert (full.notes["hypothesis"], full.notes["conclusion"]) == ("true", "true")
    empty = check_idealisation(N, IdealisationInstance(A, B, Subobject.empty(rel))).sections[0]
    assert (empty.notes["hypothesis"], empty.notes["conclusion"]) == ("false", "false")
    assert empty.passed


def test_idealisation_relation_ambient(finset):
    A = finite_set(finset.base, 2, "A")
    B = finite_set(finset.base, 2, "B", prefix="b")
    _, _, N = adequate_ultrapower(finset, B)
    with pytest.raises(ShapeError):
        check_idealisation(N, IdealisationInstance(A, B, Subobject.full(A)))


@pytest.mark.slow
def test_soundness_over_z2(z2):
    R = z2.representable(0)
    X = z2.coproduct(R, z2.terminal()).apex
    U = principal_ultrafilter(z2, z2.global_elements(X)[0])
    N = build_nelson(z2, X, U, family=[R, z2.terminal()])
    rep = soundness_suite(N)
    assert rep.passed, [(s.name, s.failures) for s in rep.sections if not s.passed]
