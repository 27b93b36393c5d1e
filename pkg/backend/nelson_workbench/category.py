"""Finite categories: the base sites of the presheaf toposes."""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Mapping, Sequence, Tuple

import numpy as np

from nelson_workbench.errors import ShapeError, SpecError

UNDEFINED = -1


@dataclass(frozen=True, eq=False)
class FinCategory:
    """
    A finite category given by an explicit composition table.

    Objects and morphisms are referred to by index. ``table[u, v]`` is the
    index of ``u ∘ v`` (apply v, then u) or UNDEFINED. The table is stored as
    given so that broken tables can still be loaded and reported by
    ``validate``.

    Attributes:
        objects: Object names, in canonical order
        morphisms: Morphism names, in canonical order
        dom: Domain object index per morphism
        cod: Codomain object index per morphism
        identities: Identity morphism index per object
        table: (n_mor, n_mor) int array of composites
        name: Display name
    """
    objects: Tuple[str, ...]
    morphisms: Tuple[str, ...]
    dom: Tuple[int, ...]
    cod: Tuple[int, ...]
    identities: Tuple[int, ...]
    table: np.ndarray = field(repr=False)
    name: str = ""

    @classmethod
    def from_tables(
        cls,
        objects: Sequence[str],
        morphisms: Sequence[Tuple[str, str, str]],
        compose: Sequence[Tuple[str, str, str]],
        identities: Mapping[str, str],
        name: str = "",
    ) -> "FinCategory":
        """
        Build a category from named data.

        Args:
            objects: Object names
            morphisms: (name, dom, cod) triples
            compose: (u, v, w) triples meaning u ∘ v = w
            identities: Object name -> identity morphism name
            name: Display name

        Returns:
            FinCategory (not validated)
        """
        obj_ix = {o: k for k, o in enumerate(objects)}
        if len(obj_ix) != len(objects):
            raise SpecError("duplicate object names")
        names = [m[0] for m in morphisms]
        mor_ix = {m: k for k, m in enumerate(names)}
        if len(mor_ix) != len(names):
            raise SpecError("duplicate morphism names")
        try:
            dom = tuple(obj_ix[m[1]] for m in morphisms)
            cod = tuple(obj_ix[m[2]] for m in morphisms)
        except KeyError as e:
            raise SpecError(f"morphism refers to unknown object {e.args[0]!r}")
        table = np.full((len(names), len(names)), UNDEFINED, dtype=np.int64)
        for u, v, w in compose:
            for m in (u, v, w):
                if m not in mor_ix:
                    raise SpecError(f"composition refers to unknown morphism {m!r}")
            table[mor_ix[u], mor_ix[v]] = mor_ix[w]
        missing = [o for o in objects if o not in identities]
        if missing:
            raise SpecError(f"no identity given for objects {missing}")
        try:
            ids = tuple(mor_ix[identities[o]] for o in objects)
        except KeyError as e:
            raise SpecError(f"identity refers to unknown morphism {e.args[0]!r}")
        return cls(tuple(objects), tuple(names), dom, cod, ids, table, name)

    def obj_index(self, name: str) -> int:
        try:
            return self.objects.index(name)
        except ValueError:
            raise SpecError(f"unknown object {name!r} in {self.name or 'base category'}")

    def mor_index(self, name: str) -> int:
        try:
            return self.morphisms.index(name)
        except ValueError:
            raise SpecError(f"unknown morphism {name!r} in {self.name or 'base category'}")

    def compose(self, u: int, v: int) -> int:
        """Index of u ∘ v; raises ShapeError if the pair is not composable."""
        if self.dom[u] != self.cod[v] or self.table[u, v] == UNDEFINED:
            raise ShapeError(
                f"cannot compose {self.morphisms[u]} after {self.morphisms[v]}"
            )
        return int(self.table[u, v])

    @cached_property
    def into(self) -> Tuple[Tuple[int, ...], ...]:
        """Per object c, the morphisms with codomain c (ascending index)."""
        out: List[List[int]] = [[] for _ in self.objects]
        for m, c in enumerate(self.cod):
            out[c].append(m)
        return tuple(tuple(ms) for ms in out)

    @cached_property
    def hom(self) -> Dict[Tuple[int, int], Tuple[int, ...]]:
        """(c, d) -> morphisms c -> d."""
        out: Dict[Tuple[int, int], List[int]] = {}
        for m in range(len(self.morphisms)):
            out.setdefault((self.dom[m], self.cod[m]), []).append(m)
        return {k: tuple(v) for k, v in out.items()}

    def morphisms_between(self, c: int, d: int) -> Tuple[int, ...]:
        return self.hom.get((c, d), ())

    def inverse(self, u: int) -> int:
        """Index of the two-sided inverse of u, or UNDEFINED."""
        for v in self.morphisms_between(self.cod[u], self.dom[u]):
            if (self.table[u, v] == self.identities[self.cod[u]]
                    and self.table[v, u] == self.identities[self.dom[u]]):
                return v
        return UNDEFINED

    def is_groupoid(self) -> bool:
        return all(self.inverse(u) != UNDEFINED for u in range(len(self.morphisms)))

    def __len__(self) -> int:
        return len(self.objects)

    def __repr__(self) -> str:
        return (f"FinCategory({self.name or '?'}: {len(self.objects)} objects, "
                f"{len(self.morphisms)} morphisms)")


def terminal_category() -> FinCategory:
    """The one-object, one-morphism category; presheaves on it are finite sets."""
    return FinCategory.from_tables(["*"], [("id", "*", "*")], [("id", "id", "id")],
                                   {"*": "id"}, name="1")


def group_category(
    elements: Sequence[str],
    table: Sequence[Sequence[str]],
    name: str = "BG",
) -> FinCategory:
    """
    One-object category of a finite group (presheaves are right G-sets).

    Args:
        elements: Group element names
        table: table[i][j] is the name of elements[i] * elements[j]
        name: Display name

    Returns:
        FinCategory whose composite u ∘ v is the product u * v
    """
    if len(table) != len(elements) or any(len(row) != len(elements) for row in table):
        raise SpecError("group table must be square with one row per element")
    unit = [
        e for i, e in enumerate(elements)
        if all(table[i][j] == elements[j] and table[j][i] == elements[j]
               for j in range(len(elements)))
    ]
    if not unit:
        raise SpecError("group table has no identity element")
    compose = [
        (elements[i], elements[j], table[i][j])
        for i in range(len(elements)) for j in range(len(elements))
    ]
    morphisms = [(e, "*", "*") for e in elements]
    return FinCategory.from_tables(["*"], morphisms, compose, {"*": unit[0]}, name=name)


def cyclic_group(n: int) -> FinCategory:
    """B(ℤ/n) with elements g0 (identity) .. g{n-1}."""
    if n < 1:
        raise SpecError("cyclic group order must be positive")
    elements = [f"g{k}" for k in range(n)]
    table = [[f"g{(i + j) % n}" for j in range(n)] for i in range(n)]
    return group_category(elements, table, name=f"Z/{n}")


def arrow_category() -> FinCategory:
    """The category 0 -> 1 (presheaves are maps of finite sets, read backwards)."""
    morphisms = [("id0", "0", "0"), ("id1", "1", "1"), ("a", "0", "1")]
    compose = [
        ("id0", "id0", "id0"), ("id1", "id1", "id1"),
        ("a", "id0", "a"), ("id1", "a", "a"),
    ]
    return FinCategory.from_tables(["0", "1"], morphisms, compose,
                                   {"0": "id0", "1": "id1"}, name="arrow")


def groupoid_category(n: int) -> FinCategory:
    """The codiscrete groupoid on n objects: exactly one morphism between any two."""
    if n < 1:
        raise SpecError("groupoid needs at least one object")
    objects = [f"o{i}" for i in range(n)]
    morphisms = [(f"m{i}{j}", objects[i], objects[j]) for i in range(n) for j in range(n)]
    compose = [
        (f"m{j}{k}", f"m{i}{j}", f"m{i}{k}")
        for i in range(n) for j in range(n) for k in range(n)
    ]
    return FinCategory.from_tables(objects, morphisms, compose,
                                   {objects[i]: f"m{i}{i}" for i in range(n)},
                                   name=f"groupoid{n}")


def discrete_category(n: int) -> FinCategory:
    """n objects and only identities."""
    objects = [f"o{i}" for i in range(n)]
    morphisms = [(f"id{i}", objects[i], objects[i]) for i in range(n)]
    compose = [(f"id{i}", f"id{i}", f"id{i}") for i in range(n)]
    return FinCategory.from_tables(objects, morphisms, compose,
                                   {objects[i]: f"id{i}" for i in range(n)},
                                   name=f"discrete{n}")


def builtin_category(spec: str) -> FinCategory:
    """
    Resolve a builtin base name: terminal, cyclic:n, arrow, groupoid:n, discrete:n.

    Args:
        spec: Builtin name

    Returns:
        FinCategory
    """
    kind, _, arg = spec.partition(":")
    try:
        if kind == "terminal":
            return terminal_category()
        if kind == "arrow":
            return arrow_category()
        if kind == "cyclic":
            return cyclic_group(int(arg))
        if kind == "groupoid":
            return groupoid_category(int(arg))
        if kind == "discrete":
            return discrete_category(int(arg))
    except ValueError:
        raise SpecError(f"builtin base {spec!r} needs an integer argument")
    raise SpecError(f"unknown builtin base {spec!r}")
