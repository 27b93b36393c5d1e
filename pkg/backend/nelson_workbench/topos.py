"""
The presheaf topos over a finite category.

``ToposCtx`` computes limits, colimits, the subobject classifier, power
objects, exponentials and partial map representers pointwise, and memoizes
the canonical ones so that repeated calls return the very same values.
"""
import enum
import itertools
import logging
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Any, Callable, Dict, FrozenSet, List, Optional, Sequence, Tuple

from nelson_workbench.category import FinCategory
from nelson_workbench.config import Budget
from nelson_workbench.enumerate import enumerate_maps, enumerate_subobjects
from nelson_workbench.errors import ShapeError
from nelson_workbench.presheaf import FinPresheaf, Label, PsMap, Subobject

logger = logging.getLogger(__name__)

Sieve = FrozenSet[int]
PartialElement = Tuple[Tuple[int, ...], Tuple[int, ...]]  # (sorted sieve, values)


class LimitKind(str, enum.Enum):
    """Shapes accepted by ``finite_limit``."""
    product = "product"
    equalizer = "equalizer"
    pullback = "pullback"


@dataclass(frozen=True)
class Cone:
    """A limit object with its legs."""
    apex: FinPresheaf
    legs: Tuple[PsMap, ...]


@dataclass(frozen=True)
class Classifier:
    """Ω as the presheaf of sieves, with the truth map 1 -> Ω."""
    obj: FinPresheaf
    truth: PsMap
    sieves: Tuple[Tuple[Sieve, ...], ...]

    @cached_property
    def _index(self) -> Tuple[Dict[Sieve, int], ...]:
        return tuple({s: k for k, s in enumerate(ss)} for ss in self.sieves)

    def index_of(self, c: int, sieve: Sieve) -> int:
        return self._index[c][sieve]

    def top(self, c: int) -> int:
        return self.truth.components[c][0]


@dataclass(frozen=True)
class PowerObject:
    """
    PA with PA(c) = Sub(A × y(c)).

    Attributes:
        A: The presheaf whose power object this is
        obj: PA itself
        membership: The subobject ∈ of A × PA
        stages: A × y(c) per stage c, as a product cone
        parts: The subobjects listed by PA(c), per stage
    """
    A: FinPresheaf
    obj: FinPresheaf
    membership: Subobject
    stages: Tuple[Cone, ...]
    parts: Tuple[Tuple[Subobject, ...], ...]

    @cached_property
    def _index(self) -> Tuple[Dict[Subobject, int], ...]:
        return tuple({s: k for k, s in enumerate(ps)} for ps in self.parts)

    def index_of(self, c: int, s: Subobject) -> int:
        return self._index[c][s]

    def pair(self, c: int, d: int, a: int, v: int) -> int:
        """Index in (A × y(c))(d) of (a, v) for a in A(d), v: d -> c."""
        P = self.stages[c].apex
        return P.index_of(d, (self.A.label(d, a), self.A.base.morphisms[v]))

    def holds(self, c: int, k: int, d: int, a: int, v: int) -> bool:
        """Whether (a, v) belongs to the k-th element of PA(c)."""
        return self.pair(c, d, a, v) in self.parts[c][k].parts[d]


@dataclass(frozen=True)
class Exponential:
    """
    B^A with B^A(c) = natural maps A × y(c) -> B, plus evaluation.

    Attributes:
        A: Exponent
        B: Base of the exponential
        obj: B^A
        eval: B^A × A -> B
        stages: A × y(c) per stage c
        maps: The natural maps listed by B^A(c), per stage
    """
    A: FinPresheaf
    B: FinPresheaf
    obj: FinPresheaf
    eval: PsMap
    stages: Tuple[Cone, ...]
    maps: Tuple[Tuple[PsMap, ...], ...]

    @cached_property
    def _index(self) -> Tuple[Dict[Tuple[Tuple[int, ...], ...], int], ...]:
        return tuple({m.components: k for k, m in enumerate(ms)} for ms in self.maps)

    def index_of(self, c: int, components: Tuple[Tuple[int, ...], ...]) -> int:
        """Position in B^A(c) of the map with the given components."""
        return self._index[c][components]

    def pair(self, c: int, d: int, a: int, v: int) -> int:
        P = self.stages[c].apex
        return P.index_of(d, (self.A.label(d, a), self.A.base.morphisms[v]))

    def apply(self, c: int, k: int, d: int, a: int, v: int) -> int:
        """θ_d(a, v) for θ the k-th element of B^A(c)."""
        return self.maps[c][k].components[d][self.pair(c, d, a, v)]


@dataclass(frozen=True)
class Representer:
    """
    Ã with Ã(c) = partial maps y(c) ⇀ A on a sieve, and η: A -> Ã.

    A partial element at c is stored as (sieve, values): the sieve as a
    sorted tuple of morphisms into c, values aligned with it.
    """
    A: FinPresheaf
    obj: FinPresheaf
    eta: PsMap
    elements: Tuple[Tuple[PartialElement, ...], ...]

    @cached_property
    def _index(self) -> Tuple[Dict[PartialElement, int], ...]:
        return tuple({p: k for k, p in enumerate(ps)} for ps in self.elements)

    def index_of(self, c: int, p: PartialElement) -> int:
        return self._index[c][p]

    @property
    def eta_sub(self) -> Subobject:
        return Subobject.from_mono(self.eta)

    def is_total(self, c: int, k: int) -> bool:
        return len(self.elements[c][k][0]) == len(self.A.base.into[c])

    def value(self, c: int, k: int) -> Optional[int]:
        """Value at the identity of c, or None when undefined."""
        sieve, values = self.elements[c][k]
        ident = self.A.base.identities[c]
        if ident in sieve:
            return values[sieve.index(ident)]
        return None


class ToposCtx:
    """
    Constructions in the presheaf topos over ``base``.

    Canonical objects are memoized per context; the memo is only ever filled
    with ``setdefault`` so concurrent fills agree.
    """

    def __init__(self, base: FinCategory, budget: Optional[Budget] = None):
        self.base = base
        self.budget = budget or Budget()
        self._memo: Dict[Tuple[Any, ...], Any] = {}

    def _cached(self, key: Tuple[Any, ...], build: Callable[[], Any]) -> Any:
        hit = self._memo.get(key)
        if hit is not None:
            logger.debug("memo hit %s", key[0])
            return hit
        return self._memo.setdefault(key, build())

    def _check_base(self, *items: FinPresheaf) -> None:
        for A in items:
            if A.base is not self.base:
                raise ShapeError(f"{A.name or 'presheaf'} lives over a different base")

    # basic objects

    def terminal(self) -> FinPresheaf:
        def build() -> FinPresheaf:
            n = len(self.base.objects)
            return FinPresheaf(self.base, tuple(("*",) for _ in range(n)),
                               tuple((0,) for _ in self.base.morphisms), "1")
        return self._cached(("terminal",), build)

    def initial(self) -> FinPresheaf:
        def build() -> FinPresheaf:
            n = len(self.base.objects)
            return FinPresheaf(self.base, tuple(() for _ in range(n)),
                               tuple(() for _ in self.base.morphisms), "0")
        return self._cached(("initial",), build)

    def to_terminal(self, A: FinPresheaf) -> PsMap:
        return PsMap(A, self.terminal(), tuple((0,) * A.size(c) for c in range(len(A.carrier))))

    def representable(self, c: int) -> FinPresheaf:
        """y(c): y(c)(d) = Hom(d, c), with restriction h ↦ h ∘ u."""
        def build() -> FinPresheaf:
            B = self.base
            homs = [B.morphisms_between(d, c) for d in range(len(B.objects))]
            pos = [{h: k for k, h in enumerate(hs)} for hs in homs]
            action = tuple(
                tuple(pos[B.dom[u]][B.compose(h, u)] for h in homs[B.cod[u]])
                for u in range(len(B.morphisms))
            )
            carrier = tuple(tuple(B.morphisms[h] for h in hs) for hs in homs)
            return FinPresheaf(B, carrier, action, f"y({B.objects[c]})")
        return self._cached(("representable", c), build)

    # limits

    def product_of(self, factors: Sequence[FinPresheaf]) -> Cone:
        """
        The n-ary product with its projections.

        Labels are tuples of factor labels, ordered lexicographically.
        """
        factors = tuple(factors)
        self._check_base(*factors)

        def build() -> Cone:
            B = self.base
            total = sum(
                math.prod(len(F.carrier[c]) for F in factors) for c in range(len(B.objects))
            )
            self.budget.check_elements(total, "product")
            idx = [
                list(itertools.product(*(range(F.size(c)) for F in factors)))
                for c in range(len(B.objects))
            ]
            pos = [{t: k for k, t in enumerate(ts)} for ts in idx]
            carrier = tuple(
                tuple(tuple(F.label(c, j) for F, j in zip(factors, t)) for t in ts)
                for c, ts in enumerate(idx)
            )
            action = tuple(
                tuple(
                    pos[B.dom[u]][tuple(F.action[u][j] for F, j in zip(factors, t))]
                    for t in idx[B.cod[u]]
                )
                for u in range(len(B.morphisms))
            )
            name = " × ".join(F.name or "?" for F in factors) or "1"
            P = FinPresheaf(B, carrier, action, name)
            legs = tuple(
                PsMap(P, F, tuple(tuple(t[n] for t in ts) for ts in idx))
                for n, F in enumerate(factors)
            )
            return Cone(P, legs)
        return self._cached(("product", factors), build)

    def product(self, A: FinPresheaf, B: FinPresheaf) -> Cone:
        return self.product_of([A, B])

    def tuple_map(self, cone: Cone, maps: Sequence[PsMap]) -> PsMap:
        """The map ⟨f1, ..., fn⟩ into the apex of a product cone."""
        if len(maps) != len(cone.legs):
            raise ShapeError("tuple map needs one map per factor")
        if not maps:
            raise ShapeError("tuple map needs at least one map; use to_terminal")
        source = maps[0].source
        for f, leg in zip(maps, cone.legs):
            if f.source != source or f.target != leg.target:
                raise ShapeError("tuple map components do not match the product")
        P = cone.apex
        comps = []
        for c in range(len(self.base.objects)):
            comps.append(tuple(
                P.index_of(c, tuple(f.target.label(c, f(c, i)) for f in maps))
                for i in range(source.size(c))
            ))
        return PsMap(source, P, tuple(comps))

    def equalizer(self, f: PsMap, g: PsMap) -> Cone:
        if f.source != g.source or f.target != g.target:
            raise ShapeError("equalizer needs a parallel pair")
        sub = Subobject(f.source, tuple(
            frozenset(i for i in range(f.source.size(c)) if f(c, i) == g(c, i))
            for c in range(len(self.base.objects))
        ))
        E, incl = sub.as_presheaf(f"eq({f.source.name})")
        return Cone(E, (incl,))

    def pullback(self, f: PsMap, g: PsMap) -> Cone:
        """Pullback of the cospan A -f-> C <-g- B, with legs to A and B."""
        if f.target != g.target:
            raise ShapeError("pullback needs maps with a common target")
        prod = self.product(f.source, g.source)
        P = prod.apex
        p1, p2 = prod.legs
        sub = Subobject(P, tuple(
            frozenset(i for i in range(P.size(c)) if f(c, p1(c, i)) == g(c, p2(c, i)))
            for c in range(len(self.base.objects))
        ))
        Q, incl = sub.as_presheaf(f"{f.source.name} ×_{f.target.name} {g.source.name}")
        return Cone(Q, (incl.then(p1), incl.then(p2)))

    def finite_limit(self, kind: LimitKind, data: Sequence[Any]) -> Cone:
        """
        Dispatch to the limit of the given shape.

        Args:
            kind: product (data = presheaves), equalizer or pullback (data = two maps)
            data: The diagram

        Returns:
            Cone over the diagram
        """
        kind = LimitKind(kind)
        if kind == LimitKind.product:
            if not all(isinstance(A, FinPresheaf) for A in data):
                raise ShapeError("product needs presheaves")
            return self.product_of(data)
        if len(data) != 2 or not all(isinstance(m, PsMap) for m in data):
            raise ShapeError(f"{kind.value} needs exactly two maps")
        if kind == LimitKind.equalizer:
            return self.equalizer(*data)
        return self.pullback(*data)

    # colimits

    def coproduct(self, A: FinPresheaf, B: FinPresheaf) -> Cone:
        """A ⊔ B with labels (0, a) and (1, b); the legs are the injections."""
        self._check_base(A, B)

        def build() -> Cone:
            base = self.base
            carrier = tuple(
                tuple((0, l) for l in A.carrier[c]) + tuple((1, l) for l in B.carrier[c])
                for c in range(len(base.objects))
            )
            action = []
            for u in range(len(base.morphisms)):
                off = A.size(base.dom[u])
                action.append(tuple(A.action[u]) + tuple(off + j for j in B.action[u]))
            S = FinPresheaf(base, carrier, tuple(action), f"{A.name} ⊔ {B.name}")
            inl = PsMap(A, S, tuple(tuple(range(A.size(c))) for c in range(len(carrier))))
            inr = PsMap(B, S, tuple(
                tuple(A.size(c) + j for j in range(B.size(c))) for c in range(len(carrier))
            ))
            return Cone(S, (inl, inr))
        return self._cached(("coproduct", A, B), build)

    def coequalizer(self, f: PsMap, g: PsMap) -> Tuple[FinPresheaf, PsMap]:
        """
        Quotient of the common target by the closure of f(x) ~ g(x).

        Classes are named by their least member; that relation is already
        compatible with the action.
        """
        if f.source != g.source or f.target != g.target:
            raise ShapeError("coequalizer needs a parallel pair")
        B = f.target
        base = self.base
        reps: List[List[int]] = []
        for c in range(len(base.objects)):
            parent = list(range(B.size(c)))

            def find(i: int) -> int:
                while parent[i] != i:
                    parent[i] = parent[parent[i]]
                    i = parent[i]
                return i

            for i in range(f.source.size(c)):
                a, b = find(f(c, i)), find(g(c, i))
                if a != b:
                    parent[max(a, b)] = min(a, b)
            reps.append([find(j) for j in range(B.size(c))])
        classes = [sorted(set(r)) for r in reps]
        pos = [{j: k for k, j in enumerate(cs)} for cs in classes]
        carrier = tuple(tuple(B.label(c, j) for j in cs) for c, cs in enumerate(classes))
        action = tuple(
            tuple(pos[base.dom[u]][reps[base.dom[u]][B.action[u][j]]]
                  for j in classes[base.cod[u]])
            for u in range(len(base.morphisms))
        )
        Q = FinPresheaf(base, carrier, action, f"{B.name}/~")
        q = PsMap(B, Q, tuple(
            tuple(pos[c][reps[c][j]] for j in range(B.size(c))) for c in range(len(classes))
        ))
        logger.debug("coequalizer of %r: %d -> %d elements", B, B.size(), Q.size())
        return Q, q

    def image_factorization(self, f: PsMap) -> Tuple[PsMap, Subobject]:
        """f = mono ∘ epi with mono the pointwise image of f."""
        mono = Subobject(f.target, tuple(frozenset(comp) for comp in f.components))
        I, incl = mono.as_presheaf(f"im({f.source.name})")
        epi = PsMap(f.source, I, tuple(
            tuple(incl.components[c].index(j) for j in comp)
            for c, comp in enumerate(f.components)
        ))
        return epi, mono

    def image(self, f: PsMap, S: Optional[Subobject] = None) -> Subobject:
        """Image of f, or of f restricted to S."""
        parts = []
        for c, comp in enumerate(f.components):
            src = range(len(comp)) if S is None else S.parts[c]
            parts.append(frozenset(comp[i] for i in src))
        return Subobject(f.target, tuple(parts))

    # subobject classifier

    def omega(self) -> Classifier:
        def build() -> Classifier:
            B = self.base
            sieves = []
            for c in range(len(B.objects)):
                y = self.representable(c)
                found = []
                for sub in enumerate_subobjects(y, self.budget):
                    found.append(frozenset(
                        B.morphisms_between(d, c)[k]
                        for d, part in enumerate(sub.parts) for k in part
                    ))
                sieves.append(tuple(found))
            pos = [{s: k for k, s in enumerate(ss)} for ss in sieves]
            action = []
            for u in range(len(B.morphisms)):
                c, d = B.dom[u], B.cod[u]
                action.append(tuple(
                    pos[c][frozenset(v for v in B.into[c] if B.compose(u, v) in s)]
                    for s in sieves[d]
                ))
            carrier = tuple(
                tuple(tuple(B.morphisms[m] for m in sorted(s)) for s in ss) for ss in sieves
            )
            obj = FinPresheaf(B, carrier, tuple(action), "Ω")
            truth = PsMap(self.terminal(), obj, tuple(
                (pos[c][frozenset(B.into[c])],) for c in range(len(B.objects))
            ))
            logger.info("Ω over %r: sizes %s", B, [len(ss) for ss in sieves])
            return Classifier(obj, truth, tuple(sieves))
        return self._cached(("omega",), build)

    def classify(self, S: Subobject) -> PsMap:
        """χ_S at c sends a to the sieve {u into c : A(u)(a) ∈ S}."""
        Om = self.omega()
        A = S.ambient
        B = self.base
        comps = []
        for c in range(len(B.objects)):
            comps.append(tuple(
                Om.index_of(c, frozenset(
                    u for u, (d, j) in A.restrictions(c, i) if j in S.parts[d]
                ))
                for i in range(A.size(c))
            ))
        return PsMap(A, Om.obj, tuple(comps))

    def subobject_of(self, chi: PsMap) -> Subobject:
        Om = self.omega()
        if chi.target != Om.obj:
            raise ShapeError("classifying map must target Ω")
        return Subobject(chi.source, tuple(
            frozenset(i for i, k in enumerate(comp) if k == Om.top(c))
            for c, comp in enumerate(chi.components)
        ))

    # power objects and exponentials

    def power_object(self, A: FinPresheaf) -> PowerObject:
        self._check_base(A)

        def build() -> PowerObject:
            B = self.base
            stages = tuple(
                self.product(A, self.representable(c)) for c in range(len(B.objects))
            )
            parts = tuple(
                tuple(enumerate_subobjects(st.apex, self.budget)) for st in stages
            )
            self.budget.check_elements(sum(len(p) for p in parts), f"P({A.name})")
            pos = [{s: k for k, s in enumerate(ps)} for ps in parts]
            action = []
            for u in range(len(B.morphisms)):
                c, d = B.dom[u], B.cod[u]
                src, dst = stages[d].apex, stages[c].apex
                row = []
                for s in parts[d]:
                    new = []
                    for e in range(len(B.objects)):
                        keep = set()
                        for k in range(dst.size(e)):
                            la, lv = dst.label(e, k)
                            v = B.mor_index(lv)
                            if src.index_of(e, (la, B.morphisms[B.compose(u, v)])) in s.parts[e]:
                                keep.add(k)
                        new.append(frozenset(keep))
                    row.append(pos[c][Subobject(dst, tuple(new))])
                action.append(tuple(row))
            carrier = tuple(
                tuple(_subobject_label(s) for s in ps) for ps in parts
            )
            PA = FinPresheaf(B, carrier, tuple(action), f"P({A.name})")
            prod = self.product(A, PA)
            mem = []
            for c in range(len(B.objects)):
                ident = B.morphisms[B.identities[c]]
                keep = set()
                for k in range(prod.apex.size(c)):
                    a, s = prod.legs[0](c, k), prod.legs[1](c, k)
                    pair = stages[c].apex.index_of(c, (A.label(c, a), ident))
                    if pair in parts[c][s].parts[c]:
                        keep.add(k)
                mem.append(frozenset(keep))
            logger.info("P(%s): sizes %s", A.name, [len(p) for p in parts])
            return PowerObject(A, PA, Subobject(prod.apex, tuple(mem)), stages, parts)
        return self._cached(("power", A), build)

    def name_of(self, R: Subobject, A: FinPresheaf, Bobj: FinPresheaf) -> PsMap:
        """
        The name B -> PA of a relation R ↣ A × B.

        b ∈ B(c) is sent to {(a, v) : (a, B(v)b) ∈ R}.
        """
        prod = self.product(A, Bobj)
        if R.ambient != prod.apex:
            raise ShapeError("relation must be a subobject of A × B")
        P = self.power_object(A)
        base = self.base
        comps = []
        for c in range(len(base.objects)):
            st = P.stages[c].apex
            row = []
            for b in range(Bobj.size(c)):
                parts = []
                for d in range(len(base.objects)):
                    keep = set()
                    for k in range(st.size(d)):
                        la, lv = st.label(d, k)
                        v = base.mor_index(lv)
                        rb = Bobj.action[v][b]
                        if prod.apex.index_of(d, (la, Bobj.label(d, rb))) in R.parts[d]:
                            keep.add(k)
                    parts.append(frozenset(keep))
                row.append(P.index_of(c, Subobject(st, tuple(parts))))
            comps.append(tuple(row))
        return PsMap(Bobj, P.obj, tuple(comps))

    def subobject_name(self, S: Subobject) -> PsMap:
        """The global element 1 -> PA naming S ↣ A."""
        A = S.ambient
        one = self.terminal()
        prod = self.product(A, one)
        R = Subobject(prod.apex, tuple(
            frozenset(k for k in range(prod.apex.size(c)) if prod.legs[0](c, k) in S.parts[c])
            for c in range(len(self.base.objects))
        ))
        return self.name_of(R, A, one)

    def exponential(self, A: FinPresheaf, Bobj: FinPresheaf) -> Exponential:
        self._check_base(A, Bobj)

        def build() -> Exponential:
            base = self.base
            stages = tuple(
                self.product(A, self.representable(c)) for c in range(len(base.objects))
            )
            maps = tuple(
                tuple(enumerate_maps(st.apex, Bobj, self.budget)) for st in stages
            )
            self.budget.check_elements(sum(len(m) for m in maps), f"{Bobj.name}^{A.name}")
            pos = [{m.components: k for k, m in enumerate(ms)} for ms in maps]
            action = []
            for u in range(len(base.morphisms)):
                c, d = base.dom[u], base.cod[u]
                src, dst = stages[d].apex, stages[c].apex
                row = []
                for theta in maps[d]:
                    comps = []
                    for e in range(len(base.objects)):
                        vals = []
                        for k in range(dst.size(e)):
                            la, lv = dst.label(e, k)
                            v = base.mor_index(lv)
                            j = src.index_of(e, (la, base.morphisms[base.compose(u, v)]))
                            vals.append(theta.components[e][j])
                        comps.append(tuple(vals))
                    row.append(pos[c][tuple(comps)])
                action.append(tuple(row))
            carrier = tuple(
                tuple(_map_label(m) for m in ms) for ms in maps
            )
            E = FinPresheaf(base, carrier, tuple(action), f"{Bobj.name}^{A.name}")
            prod = self.product(E, A)
            ev = []
            for c in range(len(base.objects)):
                ident = base.identities[c]
                row = []
                for k in range(prod.apex.size(c)):
                    t, a = prod.legs[0](c, k), prod.legs[1](c, k)
                    j = stages[c].apex.index_of(c, (A.label(c, a), base.morphisms[ident]))
                    row.append(maps[c][t].components[c][j])
                ev.append(tuple(row))
            logger.info("%s^%s: sizes %s", Bobj.name, A.name, [len(m) for m in maps])
            return Exponential(A, Bobj, E, PsMap(prod.apex, Bobj, tuple(ev)), stages, maps)
        return self._cached(("exponential", A, Bobj), build)

    def curry(self, h: PsMap, C: FinPresheaf, A: FinPresheaf) -> PsMap:
        """
        Transpose h: C × A -> B to C -> B^A.

        x ∈ C(c) goes to θ with θ_e(a, v) = h(C(v)x, a).
        """
        prod = self.product(C, A)
        if h.source != prod.apex:
            raise ShapeError("curry needs a map out of C × A")
        ex = self.exponential(A, h.target)
        base = self.base
        comps = []
        for c in range(len(base.objects)):
            st = ex.stages[c].apex
            row = []
            for x in range(C.size(c)):
                theta = []
                for e in range(len(base.objects)):
                    vals = []
                    for k in range(st.size(e)):
                        la, lv = st.label(e, k)
                        v = base.mor_index(lv)
                        cx = C.action[v][x]
                        vals.append(h(e, prod.apex.index_of(e, (C.label(e, cx), la))))
                    theta.append(tuple(vals))
                row.append(ex.index_of(c, tuple(theta)))
            comps.append(tuple(row))
        return PsMap(C, ex.obj, tuple(comps))

    def exponential_map(self, X: FinPresheaf, f: PsMap) -> PsMap:
        """f^X: A^X -> B^X, θ ↦ f ∘ θ."""
        src = self.exponential(X, f.source)
        dst = self.exponential(X, f.target)
        comps = []
        for c, ms in enumerate(src.maps):
            comps.append(tuple(dst.index_of(c, m.then(f).components) for m in ms))
        return PsMap(src.obj, dst.obj, tuple(comps))

    # partial map representers

    def partial_map_representer(self, A: FinPresheaf) -> Representer:
        self._check_base(A)

        def build() -> Representer:
            base = self.base
            Om = self.omega()
            elements = []
            for c in range(len(base.objects)):
                y = self.representable(c)
                found: List[PartialElement] = []
                for sieve in Om.sieves[c]:
                    ms = tuple(sorted(sieve))
                    sub = Subobject(y, tuple(
                        frozenset(
                            k for k, h in enumerate(base.morphisms_between(d, c)) if h in sieve
                        )
                        for d in range(len(base.objects))
                    ))
                    D, incl = sub.as_presheaf()
                    for p in enumerate_maps(D, A, self.budget):
                        by_mor = {}
                        for d in range(len(base.objects)):
                            for k, j in enumerate(incl.components[d]):
                                by_mor[base.morphisms_between(d, c)[j]] = p(d, k)
                        found.append((ms, tuple(by_mor[m] for m in ms)))
                elements.append(tuple(found))
            self.budget.check_elements(sum(len(e) for e in elements), f"~{A.name}")
            pos = [{p: k for k, p in enumerate(ps)} for ps in elements]
            action = []
            for u in range(len(base.morphisms)):
                c, d = base.dom[u], base.cod[u]
                row = []
                for sieve, values in elements[d]:
                    val = dict(zip(sieve, values))
                    pulled = tuple(v for v in base.into[c] if base.compose(u, v) in val)
                    row.append(pos[c][(pulled, tuple(val[base.compose(u, v)] for v in pulled))])
                action.append(tuple(row))
            carrier = tuple(
                tuple(_partial_label(base, A, sieve, values) for sieve, values in ps)
                for ps in elements
            )
            At = FinPresheaf(base, carrier, tuple(action), f"~{A.name}")
            eta = []
            for c in range(len(base.objects)):
                full = tuple(base.into[c])
                eta.append(tuple(
                    pos[c][(full, tuple(A.action[u][a] for u in full))]
                    for a in range(A.size(c))
                ))
            logger.info("~%s: sizes %s", A.name, [len(e) for e in elements])
            return Representer(A, At, PsMap(A, At, tuple(eta)), tuple(elements))
        return self._cached(("representer", A), build)

    def extend(self, D: Subobject, f: PsMap) -> PsMap:
        """
        The total map B -> Ã classifying the partial map (D ↣ B, f: D -> A).

        b ∈ B(c) goes to the sieve {u : B(u)b ∈ D} with values f(B(u)b).

        Args:
            D: Domain of definition, a subobject of B
            f: Map out of ``D.as_presheaf()[0]``
        """
        Dobj, incl = D.as_presheaf()
        if f.source != Dobj:
            raise ShapeError("partial map values must be defined on the domain subobject")
        Bobj = D.ambient
        R = self.partial_map_representer(f.target)
        base = self.base
        where = [{j: k for k, j in enumerate(comp)} for comp in incl.components]
        comps = []
        for c in range(len(base.objects)):
            row = []
            for b in range(Bobj.size(c)):
                sieve, values = [], []
                for u in base.into[c]:
                    d = base.dom[u]
                    rb = Bobj.action[u][b]
                    if rb in D.parts[d]:
                        sieve.append(u)
                        values.append(f(d, where[d][rb]))
                row.append(R.index_of(c, (tuple(sieve), tuple(values))))
            comps.append(tuple(row))
        return PsMap(Bobj, R.obj, tuple(comps))

    def representer_map(self, f: PsMap) -> PsMap:
        """f̃: Ã -> B̃, (D, p) ↦ (D, f ∘ p)."""
        src = self.partial_map_representer(f.source)
        dst = self.partial_map_representer(f.target)
        base = self.base
        comps = []
        for c, ps in enumerate(src.elements):
            row = []
            for sieve, values in ps:
                row.append(dst.index_of(c, (sieve, tuple(
                    f(base.dom[u], a) for u, a in zip(sieve, values)
                ))))
            comps.append(tuple(row))
        return PsMap(src.obj, dst.obj, tuple(comps))

    def intersect_tilde(self, A: FinPresheaf) -> PsMap:
        """
        ∩̃: Ã × Ã -> Ã, defined where both sides are defined and agree.
        """
        def build() -> PsMap:
            R = self.partial_map_representer(A)
            prod = self.product(R.obj, R.obj)
            comps = []
            for c in range(len(self.base.objects)):
                row = []
                for k in range(prod.apex.size(c)):
                    s1, v1 = R.elements[c][prod.legs[0](c, k)]
                    s2, v2 = R.elements[c][prod.legs[1](c, k)]
                    m2 = dict(zip(s2, v2))
                    keep = [(u, a) for u, a in zip(s1, v1) if m2.get(u) == a]
                    row.append(R.index_of(c, (
                        tuple(u for u, _ in keep), tuple(a for _, a in keep)
                    )))
                comps.append(tuple(row))
            return PsMap(prod.apex, R.obj, tuple(comps))
        return self._cached(("intersect_tilde", A), build)

    # hom-sets

    def hom_set(self, A: FinPresheaf, B: FinPresheaf) -> List[PsMap]:
        self._check_base(A, B)
        return enumerate_maps(A, B, self.budget)

    def global_elements(self, A: FinPresheaf) -> List[PsMap]:
        return self.hom_set(self.terminal(), A)

    def subobjects(self, A: FinPresheaf) -> Tuple[Subobject, ...]:
        self._check_base(A)
        return self._cached(("subobjects", A),
                            lambda: tuple(enumerate_subobjects(A, self.budget)))


def _subobject_label(s: Subobject) -> Tuple[Label, ...]:
    A = s.ambient
    return tuple(A.label(c, i) for c, p in enumerate(s.parts) for i in sorted(p))


def _map_label(m: PsMap) -> Tuple[Label, ...]:
    return tuple(m.target.label(c, j) for c, comp in enumerate(m.components) for j in comp)


def _partial_label(base: FinCategory, A: FinPresheaf, sieve, values) -> Tuple[Label, ...]:
    return tuple(
        (base.morphisms[u], A.label(base.dom[u], a)) for u, a in zip(sieve, values)
    )
