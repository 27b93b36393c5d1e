import pytest

from nelson_workbench.category import (
    FinCategory,
    arrow_category,
    builtin_category,
    cyclic_group,
    discrete_category,
    group_category,
    groupoid_category,
    terminal_category,
)
from nelson_workbench.errors import ShapeError, SpecError
from nelson_workbench.validate import validate_category


@pytest.mark.parametrize("base", [
    terminal_category(), cyclic_group(2), cyclic_group(3), arrow_category(),
    groupoid_category(2), discrete_category(2),
])
def test_standard_bases_validate(base):
    assert validate_category(base).ok


def test_cyclic_composition_wraps():
    C = cyclic_group(3)
    assert C.morphisms[C.compose(C.mor_index("g1"), C.mor_index("g2"))] == "g0"
    assert C.name == "Z/3"


def test_groupoid_detection():
    assert cyclic_group(4).is_groupoid()
    assert groupoid_category(3).is_groupoid()
    assert not arrow_category().is_groupoid()


def test_arrow_has_no_composite_backwards():
    C = arrow_category()
    a = C.mor_index("a")
    with pytest.raises(ShapeError):
        C.compose(a, a)


def test_group_table_without_unit_is_rejected():
    with pytest.raises(SpecError, match="identity"):
        group_category(["a", "b"], [["a", "a"], ["a", "a"]])


def test_broken_table_reports_typing():
    C = FinCategory.from_tables(
        ["*"], [("id", "*", "*"), ("g", "*", "*")],
        [("id", "id", "id"), ("id", "g", "g"), ("g", "id", "g")], {"*": "id"},
    )
    rep = validate_category(C)
    assert not rep.ok
    assert {v.law for v in rep.violations} == {"typing"}
    assert "(g, g)" in rep.violations[0].witness


def test_wrong_identity_is_reported():
    C = FinCategory.from_tables(
        ["*"], [("e", "*", "*"), ("g", "*", "*")],
        [("e", "e", "e"), ("e", "g", "g"), ("g", "e", "g"), ("g", "g", "e")], {"*": "g"},
    )
    laws = {v.law for v in validate_category(C).violations}
    assert "identity" in laws


@pytest.mark.parametrize("text", ["cyclic:x", "nope", "groupoid:"])
def test_builtin_errors(text):
    with pytest.raises(SpecError):
        builtin_category(text)


def test_builtin_names():
    assert builtin_category("cyclic:5").name == "Z/5"
    assert len(builtin_category("discrete:3")) == 3
    assert builtin_category("arrow").objects == ("0", "1")
