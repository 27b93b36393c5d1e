"""
Formulas of the internal language with a standardness predicate.

Text grammar (loosest binding first)::

    formula  := iff
    iff      := implies ("<=>" implies)*
    implies  := or ("=>" implies)?              right associative
    or       := and ("|" and)*
    and      := unary ("&" unary)*
    unary    := "~" unary | quant | atom
    quant    := ("forall" | "exists") ["^st"] var ":" sort "." formula
    atom     := "true" | "false" | "(" formula ")" | "st" "(" var ")"
              | name "(" var ("," var)* ")" | var "=" var | name

A quantifier body extends as far to the right as possible. The Unicode
forms ∀ ∃ ∧ ∨ ⇒ ⇔ ¬ ⊤ ⊥ are accepted as well.
"""
import re
from dataclasses import dataclass
from typing import FrozenSet, List, Tuple, Union

from nelson_workbench.errors import FormulaSyntaxError


@dataclass(frozen=True)
class Top:
    def __str__(self) -> str:
        return "true"


@dataclass(frozen=True)
class Bottom:
    def __str__(self) -> str:
        return "false"


@dataclass(frozen=True)
class Atom:
    """A named predicate applied to variables."""
    name: str
    args: Tuple[str, ...] = ()

    def __str__(self) -> str:
        return f"{self.name}({','.join(self.args)})" if self.args else self.name


@dataclass(frozen=True)
class Eq:
    left: str
    right: str

    def __str__(self) -> str:
        return f"{self.left} = {self.right}"


@dataclass(frozen=True)
class St:
    """st(x): x is a standard element."""
    var: str

    def __str__(self) -> str:
        return f"st({self.var})"


@dataclass(frozen=True)
class Not:
    body: "Formula"

    def __str__(self) -> str:
        return f"~{_wrap(self.body)}"


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"{_wrap(self.left)} & {_wrap(self.right)}"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"{_wrap(self.left)} | {_wrap(self.right)}"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"{_wrap(self.left)} => {_wrap(self.right)}"


@dataclass(frozen=True)
class Iff:
    left: "Formula"
    right: "Formula"

    def __str__(self) -> str:
        return f"{_wrap(self.left)} <=> {_wrap(self.right)}"


@dataclass(frozen=True)
class Exists:
    var: str
    sort: str
    body: "Formula"
    standard: bool = False

    def __str__(self) -> str:
        return f"exists{'^st' if self.standard else ''} {self.var}:{self.sort}. {self.body}"


@dataclass(frozen=True)
class Forall:
    var: str
    sort: str
    body: "Formula"
    standard: bool = False

    def __str__(self) -> str:
        return f"forall{'^st' if self.standard else ''} {self.var}:{self.sort}. {self.body}"


Formula = Union[Top, Bottom, Atom, Eq, St, Not, And, Or, Implies, Iff, Exists, Forall]

_SIMPLE = (Top, Bottom, Atom, Eq, St, Not)


def _wrap(phi: "Formula") -> str:
    return str(phi) if isinstance(phi, _SIMPLE) else f"({phi})"


def free_vars(phi: Formula) -> FrozenSet[str]:
    if isinstance(phi, (Top, Bottom)):
        return frozenset()
    if isinstance(phi, Atom):
        return frozenset(phi.args)
    if isinstance(phi, Eq):
        return frozenset((phi.left, phi.right))
    if isinstance(phi, St):
        return frozenset((phi.var,))
    if isinstance(phi, Not):
        return free_vars(phi.body)
    if isinstance(phi, (Exists, Forall)):
        return free_vars(phi.body) - {phi.var}
    return free_vars(phi.left) | free_vars(phi.right)


# tokenizer

_UNICODE = {"∀": "forall", "∃": "exists", "∧": "&", "∨": "|", "⇒": "=>", "→": "=>",
            "⇔": "<=>", "↔": "<=>", "¬": "~", "⊤": "true", "⊥": "false"}

_TOKEN = re.compile(r"""
    (?P<ws>\s+)
  | (?P<quant>(?:forall|exists)(?:\^st)?(?![\w']))
  | (?P<op><=>|=>|[()&|~:.,=])
  | (?P<name>[A-Za-z0-9_][A-Za-z0-9_']*)
""", re.VERBOSE)


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    pos: int


def tokenize(text: str) -> List[Token]:
    out: List[Token] = []
    pos = 0
    while pos < len(text):
        ch = text[pos]
        if ch in _UNICODE:
            word = _UNICODE[ch]
            if word in ("forall", "exists") and text.startswith("^st", pos + 1):
                out.append(Token("quant", word + "^st", pos))
                pos += 4
                continue
            kind = "quant" if word in ("forall", "exists") else "name" if word in ("true", "false") else "op"
            out.append(Token(kind, word, pos))
            pos += 1
            continue
        m = _TOKEN.match(text, pos)
        if m is None:
            raise FormulaSyntaxError(f"unexpected character {ch!r}", pos)
        if m.lastgroup != "ws":
            out.append(Token(m.lastgroup, m.group(), pos))
        pos = m.end()
    out.append(Token("end", "", len(text)))
    return out


class _Parser:
    def __init__(self, text: str):
        self.tokens = tokenize(text)
        self.i = 0

    @property
    def tok(self) -> Token:
        return self.tokens[self.i]

    def advance(self) -> Token:
        t = self.tokens[self.i]
        self.i += 1
        return t

    def accept(self, text: str) -> bool:
        if self.tok.kind == "op" and self.tok.text == text:
            self.i += 1
            return True
        return False

    def expect(self, text: str) -> None:
        if not self.accept(text):
            self.fail(f"expected {text!r}")

    def name(self, what: str) -> str:
        if self.tok.kind != "name" or self.tok.text in ("true", "false", "st"):
            self.fail(f"expected {what}")
        return self.advance().text

    def fail(self, message: str):
        got = self.tok.text or "end of input"
        raise FormulaSyntaxError(f"{message}, found {got!r}", self.tok.pos)

    def parse(self) -> Formula:
        phi = self.iff()
        if self.tok.kind != "end":
            self.fail("unexpected token")
        return phi

    def iff(self) -> Formula:
        phi = self.implies()
        while self.accept("<=>"):
            phi = Iff(phi, self.implies())
        return phi

    def implies(self) -> Formula:
        phi = self.disj()
        if self.accept("=>"):
            return Implies(phi, self.implies())
        return phi

    def disj(self) -> Formula:
        phi = self.conj()
        while self.accept("|"):
            phi = Or(phi, self.conj())
        return phi

    def conj(self) -> Formula:
        phi = self.unary()
        while self.accept("&"):
            phi = And(phi, self.unary())
        return phi

    def unary(self) -> Formula:
        if self.accept("~"):
            return Not(self.unary())
        if self.tok.kind == "quant":
            word = self.advance().text
            var = self.name("a variable")
            self.expect(":")
            sort = self.name("a sort")
            self.expect(".")
            body = self.iff()
            cls = Forall if word.startswith("forall") else Exists
            return cls(var, sort, body, standard=word.endswith("^st"))
        return self.atom()

    def atom(self) -> Formula:
        if self.accept("("):
            phi = self.iff()
            self.expect(")")
            return phi
        if self.tok.kind != "name":
            self.fail("expected a formula")
        word = self.advance().text
        if word == "true":
            return Top()
        if word == "false":
            return Bottom()
        if word == "st":
            self.expect("(")
            var = self.name("a variable")
            self.expect(")")
            return St(var)
        if self.accept("("):
            args = [self.name("a variable")]
            while self.accept(","):
                args.append(self.name("a variable"))
            self.expect(")")
            return Atom(word, tuple(args))
        if self.accept("="):
            return Eq(word, self.name("a variable"))
        return Atom(word)


def parse(text: str) -> Formula:
    """
    Parse formula text.

    Raises:
        FormulaSyntaxError: With the character position of the offending token
    """
    return _Parser(text).parse()
