import pytest

from nelson_workbench.errors import FormulaSyntaxError
from nelson_workbench.formula import (
    And,
    Atom,
    Bottom,
    Eq,
    Exists,
    Forall,
    Iff,
    Implies,
    Not,
    Or,
    St,
    Top,
    free_vars,
    parse,
)

a, b, c = Atom("a"), Atom("b"), Atom("c")


@pytest.mark.parametrize("text,expected", [
    ("a | b & c", Or(a, And(b, c))),
    ("a => b => c", Implies(a, Implies(b, c))),
    ("a <=> b <=> c", Iff(Iff(a, b), c)),
    ("~a & b", And(Not(a), b)),
    ("(a | b) & c", And(Or(a, b), c)),
    ("true => false", Implies(Top(), Bottom())),
    ("x = y", Eq("x", "y")),
    ("st(x)", St("x")),
    ("P(x, y)", Atom("P", ("x", "y"))),
])
def test_precedence(text, expected):
    assert parse(text) == expected


def test_quantifier_body_extends_right():
    phi = parse("forall x:A. P(x) => exists^st y:B. R(x,y) & Q(y)")
    assert phi == Forall("x", "A", Implies(
        Atom("P", ("x",)),
        Exists("y", "B", And(Atom("R", ("x", "y")), Atom("Q", ("y",))), standard=True),
    ))


def test_unicode_forms():
    assert parse("∀^st x:A. ¬P(x) ∨ ⊤") == parse("forall^st x:A. ~P(x) | true")
    assert parse("∃y:B. Q(y) ⇒ ⊥") == parse("exists y:B. Q(y) => false")
    assert parse("a ∧ b ⇔ c") == Iff(And(a, b), c)


@pytest.mark.parametrize("text,position", [
    ("P(x", 3),
    ("x $ y", 2),
    ("forall x A. P(x)", 9),
    ("a &", 3),
])
def test_syntax_error_positions(text, position):
    with pytest.raises(FormulaSyntaxError) as info:
        parse(text)
    assert info.value.position == position


def test_printing_parenthesises_compound_operands():
    phi = And(Atom("P", ("x",)), Or(Atom("Q"), Atom("R")))
    assert str(phi) == "P(x) & (Q | R)"
    assert parse(str(phi)) == phi
    assert str(Forall("x", "A", St("x"), standard=True)) == "forall^st x:A. st(x)"


def test_free_vars():
    phi = parse("forall x:A. R(x, y) & exists z:B. S(z, w)")
    assert free_vars(phi) == frozenset({"y", "w"})
    assert free_vars(parse("st(x) | x = y")) == frozenset({"x", "y"})
