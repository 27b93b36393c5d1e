"""Presheaves on a finite category, natural maps between them, and subobjects."""
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, FrozenSet, Hashable, Iterator, List, Mapping, Optional, Sequence, Tuple

from nelson_workbench.category import FinCategory
from nelson_workbench.errors import ShapeError, SpecError

Label = Hashable
Element = Tuple[int, int]  # (base object, carrier index)


@dataclass(frozen=True)
class FinPresheaf:
    """
    A contravariant functor from a finite category to finite sets.

    Elements live at a stage (base object) and are referred to by their index
    in ``carrier[c]``. For a morphism u: c -> d, ``action[u]`` is indexed by
    carrier(d) and gives indices into carrier(c).

    Attributes:
        base: Base category
        carrier: Labels per base object, in canonical order
        action: Restriction table per base morphism
        name: Display name (ignored by equality)
    """
    base: FinCategory
    carrier: Tuple[Tuple[Label, ...], ...]
    action: Tuple[Tuple[int, ...], ...]
    name: str = field(default="", compare=False)

    @classmethod
    def from_labels(
        cls,
        base: FinCategory,
        carrier: Mapping[str, Sequence[Label]],
        action: Mapping[str, Mapping[Label, Label]],
        name: str = "",
    ) -> "FinPresheaf":
        """
        Build a presheaf from labelled data.

        Identity actions may be omitted. Every other morphism needs a full
        table from carrier(cod) to carrier(dom).

        Args:
            base: Base category
            carrier: Object name -> element labels
            action: Morphism name -> {element of cod: element of dom}
            name: Display name

        Returns:
            FinPresheaf (not validated)
        """
        unknown = sorted(set(carrier) - set(base.objects))
        if unknown:
            raise SpecError(f"presheaf {name!r}: unknown objects {unknown}")
        unknown = sorted(set(action) - set(base.morphisms))
        if unknown:
            raise SpecError(f"presheaf {name!r}: unknown morphisms {unknown}")
        labels = tuple(tuple(carrier.get(o, ())) for o in base.objects)
        for c, ls in enumerate(labels):
            if len(set(ls)) != len(ls):
                raise SpecError(f"presheaf {name!r}: repeated element at {base.objects[c]}")
        index = [{l: i for i, l in enumerate(ls)} for ls in labels]
        tables: List[Tuple[int, ...]] = []
        for u, mname in enumerate(base.morphisms):
            c, d = base.dom[u], base.cod[u]
            if mname not in action:
                if u == base.identities[c]:
                    tables.append(tuple(range(len(labels[c]))))
                    continue
                raise SpecError(f"presheaf {name!r}: no action given for {mname}")
            table = action[mname]
            try:
                tables.append(tuple(index[c][table[l]] for l in labels[d]))
            except KeyError as e:
                raise SpecError(
                    f"presheaf {name!r}: action of {mname} has bad element {e.args[0]!r}"
                )
        return cls(base, labels, tuple(tables), name)

    @cached_property
    def _index(self) -> Tuple[Dict[Label, int], ...]:
        return tuple({l: i for i, l in enumerate(ls)} for ls in self.carrier)

    def index_of(self, c: int, label: Label) -> int:
        try:
            return self._index[c][label]
        except KeyError:
            raise SpecError(
                f"{label!r} is not an element of {self.name or 'presheaf'} "
                f"at {self.base.objects[c]}"
            )

    def act(self, u: int, i: int) -> int:
        """Restrict element i of carrier(cod u) along u."""
        return self.action[u][i]

    def size(self, c: Optional[int] = None) -> int:
        if c is not None:
            return len(self.carrier[c])
        return sum(len(ls) for ls in self.carrier)

    def elements(self) -> Iterator[Element]:
        """All elements in canonical order: by stage, then carrier index."""
        for c, ls in enumerate(self.carrier):
            for i in range(len(ls)):
                yield c, i

    def label(self, c: int, i: int) -> Label:
        return self.carrier[c][i]

    def restrictions(self, c: int, i: int) -> Iterator[Tuple[int, Element]]:
        """(u, A(u)(i)) for every morphism u into c."""
        for u in self.base.into[c]:
            yield u, (self.base.dom[u], self.action[u][i])

    def __repr__(self) -> str:
        sizes = ",".join(str(len(ls)) for ls in self.carrier)
        return f"FinPresheaf({self.name or '?'}: [{sizes}])"


@dataclass(frozen=True)
class PsMap:
    """
    A natural family of functions between presheaves on the same base.

    ``components[c][i]`` is the image in target(c) of element i of source(c).
    """
    source: FinPresheaf
    target: FinPresheaf
    components: Tuple[Tuple[int, ...], ...]

    @classmethod
    def identity(cls, A: FinPresheaf) -> "PsMap":
        return cls(A, A, tuple(tuple(range(len(ls))) for ls in A.carrier))

    @classmethod
    def from_labels(
        cls,
        source: FinPresheaf,
        target: FinPresheaf,
        components: Mapping[str, Mapping[Label, Label]],
    ) -> "PsMap":
        """Build a map from {object name: {source label: target label}}."""
        if source.base is not target.base:
            raise ShapeError("map between presheaves on different bases")
        base = source.base
        out = []
        for c, o in enumerate(base.objects):
            table = components.get(o, {})
            try:
                out.append(tuple(target.index_of(c, table[l]) for l in source.carrier[c]))
            except KeyError as e:
                raise SpecError(f"map component at {o} has no value for {e.args[0]!r}")
        return cls(source, target, tuple(out))

    def __call__(self, c: int, i: int) -> int:
        return self.components[c][i]

    def then(self, other: "PsMap") -> "PsMap":
        """Diagrammatic composite: first self, then other."""
        if self.target != other.source:
            raise ShapeError(
                f"cannot compose {self.source.name}->{self.target.name} "
                f"with {other.source.name}->{other.target.name}"
            )
        return PsMap(
            self.source,
            other.target,
            tuple(
                tuple(other.components[c][j] for j in comp)
                for c, comp in enumerate(self.components)
            ),
        )

    def is_mono(self) -> bool:
        return all(len(set(comp)) == len(comp) for comp in self.components)

    def is_epi(self) -> bool:
        return all(
            len(set(comp)) == self.target.size(c) for c, comp in enumerate(self.components)
        )

    def is_iso(self) -> bool:
        return self.is_mono() and self.is_epi()

    def inverse(self) -> "PsMap":
        if not self.is_iso():
            raise ShapeError("map is not an isomorphism")
        inv = []
        for comp in self.components:
            row = [0] * len(comp)
            for i, j in enumerate(comp):
                row[j] = i
            inv.append(tuple(row))
        return PsMap(self.target, self.source, tuple(inv))


@dataclass(frozen=True)
class Subobject:
    """
    A subfunctor of ``ambient``: per-stage index sets closed under restriction.

    Every mono is normalized to this form, so two subobjects of one ambient
    are equal exactly when their parts coincide.
    """
    ambient: FinPresheaf
    parts: Tuple[FrozenSet[int], ...]

    @classmethod
    def full(cls, A: FinPresheaf) -> "Subobject":
        return cls(A, tuple(frozenset(range(len(ls))) for ls in A.carrier))

    @classmethod
    def empty(cls, A: FinPresheaf) -> "Subobject":
        return cls(A, tuple(frozenset() for _ in A.carrier))

    @classmethod
    def from_mono(cls, m: PsMap) -> "Subobject":
        """Normalize a monic map to the subobject it represents (its image)."""
        if not m.is_mono():
            raise ShapeError("map is not monic")
        return cls(m.target, tuple(frozenset(comp) for comp in m.components))

    @classmethod
    def from_labels(cls, A: FinPresheaf, parts: Mapping[str, Sequence[Label]]) -> "Subobject":
        """Build from {object name: [labels]}; the result must be closed."""
        base = A.base
        unknown = sorted(set(parts) - set(base.objects))
        if unknown:
            raise SpecError(f"subobject of {A.name!r}: unknown objects {unknown}")
        sub = cls(A, tuple(
            frozenset(A.index_of(c, l) for l in parts.get(o, ()))
            for c, o in enumerate(base.objects)
        ))
        hole = sub.closure_witness()
        if hole is not None:
            raise SpecError(f"subobject of {A.name!r} is not closed under the action: {hole}")
        return sub

    @classmethod
    def generated(cls, A: FinPresheaf, elements: Sequence[Element]) -> "Subobject":
        """The least subobject containing the given elements."""
        parts: List[set] = [set() for _ in A.carrier]
        for c, i in elements:
            for _, (d, j) in A.restrictions(c, i):
                parts[d].add(j)
        return cls(A, tuple(frozenset(p) for p in parts))

    def closure_witness(self) -> Optional[str]:
        """Describe one element whose restriction leaves the parts, if any."""
        A = self.ambient
        for c, part in enumerate(self.parts):
            for i in sorted(part):
                for u, (d, j) in A.restrictions(c, i):
                    if j not in self.parts[d]:
                        return (f"{A.label(c, i)!r} restricts along {A.base.morphisms[u]} "
                                f"to {A.label(d, j)!r}")
        return None

    def contains(self, c: int, i: int) -> bool:
        return i in self.parts[c]

    def leq(self, other: "Subobject") -> bool:
        self._same_ambient(other)
        return all(p <= q for p, q in zip(self.parts, other.parts))

    def size(self) -> int:
        return sum(len(p) for p in self.parts)

    def is_full(self) -> bool:
        return all(len(p) == self.ambient.size(c) for c, p in enumerate(self.parts))

    def is_empty(self) -> bool:
        return not any(self.parts)

    def key(self) -> Tuple[Tuple[int, ...], ...]:
        """Canonical sort key."""
        return tuple(tuple(sorted(p)) for p in self.parts)

    def _same_ambient(self, other: "Subobject") -> None:
        if self.ambient != other.ambient:
            raise ShapeError(
                f"subobjects of different objects {self.ambient.name!r} "
                f"and {other.ambient.name!r}"
            )

    def as_presheaf(self, name: str = "") -> Tuple[FinPresheaf, PsMap]:
        """
        Materialize the subfunctor as a presheaf with its inclusion.

        Returns:
            (presheaf, inclusion into ambient)
        """
        A = self.ambient
        keep = [tuple(sorted(p)) for p in self.parts]
        pos = [{j: k for k, j in enumerate(ks)} for ks in keep]
        carrier = tuple(tuple(A.carrier[c][j] for j in ks) for c, ks in enumerate(keep))
        action = tuple(
            tuple(pos[A.base.dom[u]][A.action[u][j]] for j in keep[A.base.cod[u]])
            for u in range(len(A.base.morphisms))
        )
        S = FinPresheaf(A.base, carrier, action, name or f"sub({A.name})")
        return S, PsMap(S, A, tuple(keep))

    def labels(self) -> Dict[str, List[Label]]:
        A = self.ambient
        return {
            A.base.objects[c]: [A.label(c, i) for i in sorted(p)]
            for c, p in enumerate(self.parts)
        }
