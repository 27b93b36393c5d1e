import json

import pytest

from nelson_workbench.config import Budget
from nelson_workbench.errors import BudgetExceeded, SpecError
from nelson_workbench.specfile import default_family, load_spec, loads
from nelson_workbench.ultra import FilterKind
from nelson_workbench.ultrapower import UltrapowerPath

FINSET = {
    "builtin": "terminal",
    "presheaves": {"A": {"carrier": {"*": ["a0", "a1"]}}, "one": {"builtin": "terminal"}},
}


def _spec(**extra):
    return json.dumps({**FINSET, **extra})


def test_load_principal_spec(data_dir):
    spec = load_spec(data_dir / "finset_principal.json")
    assert spec.name == "finset_principal"
    assert spec.presheaf("A").size() == 2
    assert spec.presheaf("one") == spec.ctx.terminal()
    assert spec.maps["pick"].components == ((0,),)
    assert spec.subobject("S").parts == (frozenset({0}),)
    assert spec.filter("U").kind == FilterKind.principal
    assert spec.nelson.path == UltrapowerPath.auto
    assert [P.name for P in default_family(spec)] == ["A", "one"]


def test_coproduct_point_labels(data_dir):
    spec = load_spec(data_dir / "z2_regular.json")
    X = spec.presheaf("X")
    assert X.size() == 3
    U = spec.filter("U")
    assert X.label(0, U.point.components[0][0]) == (1, "*")


def test_declared_family_wins(data_dir):
    spec = load_spec(data_dir / "adequate_b2.json")
    assert spec.nelson is None
    assert spec.adequate.B == "B"
    assert [P.name for P in default_family(spec)] == ["A", "B"]
    assert [P.name for P in default_family(spec, ["B"])] == ["B"]


def test_default_family_adds_products_and_power_objects():
    spec = loads(_spec())
    family = default_family(spec)
    assert [P.name for P in family] == ["A", "one", "A×A", "A×one", "one×one", "P(A)", "P(one)"]
    assert [P.size() for P in family] == [2, 1, 4, 2, 1, 4, 2]


def test_default_family_drops_repeats():
    text = _spec(presheaves={"A": {"carrier": {"*": ["a0", "a1"]}},
                             "C": {"carrier": {"*": ["a0", "a1"]}}})
    assert [P.name for P in default_family(loads(text))] == ["A", "A×A", "P(A)"]


def test_ultrafilter_entry_forms():
    text = _spec(
        subobjects={"S": {"of": "A", "parts": {"*": ["a0"]}}},
        ultrafilters={
            "U": {"on": "A", "principal_at": {"*": "a1"}},
            "V": {"on": "A", "principal_at": "a0"},
            "W": {"on": "A", "generated_by": ["S"]},
            "Old": {"on": "A", "principal": {"*": "a1"}},
        },
    )
    spec = loads(text)
    assert spec.filter("U").point.components == ((1,),)
    assert spec.filter("V").point.components == ((0,),)
    assert spec.filter("W").kind == FilterKind.generated
    assert spec.filter("Old").point == spec.filter("U").point


def test_top_level_ultrafilter_is_picked_up_by_nelson():
    text = _spec(ultrafilter={"on": "A", "principal_at": "a0"}, nelson={"X": "A"})
    spec = loads(text)
    assert spec.nelson.ultrafilter == "ultrafilter"
    assert spec.filter("ultrafilter").kind == FilterKind.principal


def test_inline_nelson_ultrafilter():
    text = _spec(nelson={"X": "A", "ultrafilter": {"on": "A", "principal_at": {"*": "a1"}}})
    spec = loads(text)
    assert spec.filter(spec.nelson.ultrafilter).point.components == ((1,),)


def test_nelson_needs_a_named_ultrafilter_when_ambiguous():
    text = _spec(ultrafilters={"U": {"on": "A", "principal_at": "a0"},
                               "V": {"on": "A", "principal_at": "a1"}},
                 nelson={"X": "A"})
    with pytest.raises(SpecError, match="name the ultrafilter"):
        loads(text)


@pytest.mark.parametrize("text,match", [
    ("{not json", "valid JSON"),
    ("[]", "JSON object"),
    (json.dumps({"builtin": "terminal", "extra": 1}), "unknown keys"),
    (json.dumps({"presheaves": {}}), "exactly one"),
    (json.dumps({"builtin": "cyclic:x"}), "integer"),
    (json.dumps({"builtin": "moebius"}), "unknown builtin"),
    (_spec(maps={"f": {"source": "A", "target": "B"}}), "unknown presheaf"),
    (_spec(subobjects={"S": {"of": "A", "parts": {"*": ["zz"]}}}), "not an element"),
    (_spec(ultrafilters={"U": {"on": "A"}}), "exactly one of principal"),
    (_spec(ultrafilters={"U": {"on": "A", "principal_at": "a0", "generated_by": []}}), "exactly one"),
    (_spec(nelson={"X": "A", "ultrafilter": 3}), "name or an ultrafilter entry"),
    (_spec(nelson={"X": "A", "ultrafilter": "V"}), "unknown ultrafilter"),
    (_spec(nelson={"X": "A", "ultrafilter": "V", "colour": 1}), "unknown keys"),
    (_spec(presheaves={"R": {"builtin": "regular", "object": "*"}, "W": {"builtin": "wheel"}}),
     "unknown builtin"),
])
def test_malformed_specs(text, match):
    with pytest.raises(SpecError, match=match):
        loads(text)


def test_unknown_path_is_rejected():
    text = _spec(ultrafilters={"U": {"on": "A", "principal": {"*": "a0"}}},
                 nelson={"X": "A", "ultrafilter": "U", "path": "scenic"})
    with pytest.raises(SpecError, match="path"):
        loads(text)


def test_unclosed_subobject_is_rejected():
    text = json.dumps({
        "builtin": "cyclic:2",
        "presheaves": {"R": {"builtin": "regular"}},
        "subobjects": {"S": {"of": "R", "parts": {"*": ["g0"]}}},
    })
    with pytest.raises(SpecError, match="subobject S: .*not closed"):
        loads(text)



def test_group_base():
    text = json.dumps({
        "group": {"elements": ["e", "s"], "table": [["e", "s"], ["s", "e"]], "name": "C2"},
        "presheaves": {"R": {"builtin": "regular"}},
    })
    spec = loads(text)
    assert spec.base.name == "C2"
    assert spec.base.is_groupoid()
    assert spec.presheaf("R").size() == 2


def test_budget_applies_to_constructions():
    text = _spec(presheaves={
        "A": {"carrier": {"*": ["a0", "a1", "a2", "a3"]}},
        "PA": {"power": "A"},
    })
    with pytest.raises(BudgetExceeded):
        loads(text, Budget(max_elements=8, max_enumeration=8))
