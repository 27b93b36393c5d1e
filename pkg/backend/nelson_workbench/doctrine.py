"""
The hyperdoctrine of subobjects and the checks shared by every doctrine.

Predicates over an object are subobjects (or, for the derived doctrines, a
chosen representation of them). ``Doctrine`` fixes the interface that the
Beck-Chevalley, adjunction and generic-predicate suites run against.
"""
import abc
import logging
from dataclasses import dataclass
from typing import Any, Callable, Iterable, List, Optional, Sequence, Tuple

from nelson_workbench.errors import NotAPullbackError, ShapeError
from nelson_workbench.presheaf import FinPresheaf, PsMap, Subobject
from nelson_workbench.report import Section, render_parts

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class HeytingOps:
    """Heyting algebra structure on Sub(ambient)."""
    ambient: FinPresheaf

    def _own(self, *subs: Subobject) -> None:
        for S in subs:
            if S.ambient != self.ambient:
                raise ShapeError(f"subobject is not over {self.ambient.name!r}")

    def top(self) -> Subobject:
        return Subobject.full(self.ambient)

    def bottom(self) -> Subobject:
        return Subobject.empty(self.ambient)

    def meet(self, S: Subobject, T: Subobject) -> Subobject:
        self._own(S, T)
        return Subobject(self.ambient, tuple(p & q for p, q in zip(S.parts, T.parts)))

    def join(self, S: Subobject, T: Subobject) -> Subobject:
        self._own(S, T)
        return Subobject(self.ambient, tuple(p | q for p, q in zip(S.parts, T.parts)))

    def implies(self, S: Subobject, T: Subobject) -> Subobject:
        """At c: the a whose every restriction lying in S also lies in T."""
        self._own(S, T)
        A = self.ambient
        parts = []
        for c in range(len(A.carrier)):
            parts.append(frozenset(
                i for i in range(A.size(c))
                if all(j not in S.parts[d] or j in T.parts[d]
                       for _, (d, j) in A.restrictions(c, i))
            ))
        return Subobject(A, tuple(parts))

    def negate(self, S: Subobject) -> Subobject:
        return self.implies(S, self.bottom())

    def iff(self, S: Subobject, T: Subobject) -> Subobject:
        return self.meet(self.implies(S, T), self.implies(T, S))

    def leq(self, S: Subobject, T: Subobject) -> bool:
        self._own(S, T)
        return S.leq(T)


def sub_heyting(ctx, A: FinPresheaf) -> HeytingOps:
    ctx._check_base(A)
    return HeytingOps(A)


def substitute(ctx, f: PsMap, S: Subobject) -> Subobject:
    """f*(S): pointwise preimage."""
    if S.ambient != f.target:
        raise ShapeError("substitution needs a subobject of the map's target")
    return Subobject(f.source, tuple(
        frozenset(i for i, j in enumerate(comp) if j in S.parts[c])
        for c, comp in enumerate(f.components)
    ))


def exists_along(ctx, f: PsMap, S: Subobject) -> Subobject:
    """∃_f(S): the image of S under f."""
    if S.ambient != f.source:
        raise ShapeError("∃ needs a subobject of the map's source")
    return Subobject(f.target, tuple(
        frozenset(comp[i] for i in S.parts[c]) for c, comp in enumerate(f.components)
    ))


def forall_along(ctx, f: PsMap, S: Subobject) -> Subobject:
    """
    ∀_f(S) at c: the b such that every a over any restriction of b lies in S.
    """
    if S.ambient != f.source:
        raise ShapeError("∀ needs a subobject of the map's source")
    A, B = f.source, f.target
    base = A.base
    fibres = [
        {j: [i for i, t in enumerate(comp) if t == j] for j in range(B.size(c))}
        for c, comp in enumerate(f.components)
    ]
    parts = []
    for c in range(len(base.objects)):
        parts.append(frozenset(
            b for b in range(B.size(c))
            if all(a in S.parts[d]
                   for _, (d, rb) in B.restrictions(c, b)
                   for a in fibres[d][rb])
        ))
    return Subobject(B, tuple(parts))


def search_left_adjoint(ctx, f: PsMap, S: Subobject) -> Optional[Subobject]:
    """Least T with S ≤ f*(T), by exhaustive search over Sub(target)."""
    fits = [T for T in ctx.subobjects(f.target) if S.leq(substitute(ctx, f, T))]
    least = [T for T in fits if all(T.leq(T2) for T2 in fits)]
    return least[0] if least else None


def search_right_adjoint(ctx, f: PsMap, S: Subobject) -> Optional[Subobject]:
    """Greatest T with f*(T) ≤ S, by exhaustive search over Sub(target)."""
    fits = [T for T in ctx.subobjects(f.target) if substitute(ctx, f, T).leq(S)]
    greatest = [T for T in fits if all(T2.leq(T) for T2 in fits)]
    return greatest[0] if greatest else None


@dataclass(frozen=True)
class PullbackSquare:
    """
    A commuting square

        A --top--> B
        |          |
       left      right
        v          v
        I --bot--> J
    """
    top: PsMap
    left: PsMap
    right: PsMap
    bottom: PsMap


def pullback_square(ctx, right: PsMap, bottom: PsMap) -> PullbackSquare:
    """The pullback of the cospan B -right-> J <-bottom- I."""
    cone = ctx.pullback(right, bottom)
    return PullbackSquare(top=cone.legs[0], left=cone.legs[1], right=right, bottom=bottom)


def is_pullback(ctx, sq: PullbackSquare) -> Optional[str]:
    """None if the square is a pullback, otherwise why not."""
    if (sq.top.source != sq.left.source or sq.top.target != sq.right.source
            or sq.left.target != sq.bottom.source or sq.right.target != sq.bottom.target):
        return "maps do not form a square"
    if sq.top.then(sq.right).components != sq.left.then(sq.bottom).components:
        return "square does not commute"
    A = sq.top.source
    for c in range(len(A.carrier)):
        pairs = [(sq.top(c, i), sq.left(c, i)) for i in range(A.size(c))]
        if len(set(pairs)) != len(pairs):
            return f"two elements at {A.base.objects[c]} have the same legs"
        expected = {
            (b, i) for b in range(sq.right.source.size(c)) for i in range(sq.bottom.source.size(c))
            if sq.right(c, b) == sq.bottom(c, i)
        }
        if set(pairs) != expected:
            return f"comparison map is not onto at {A.base.objects[c]}"
    return None


class Doctrine(abc.ABC):
    """
    An indexed Heyting pre-algebra with quantifiers over standard objects.

    Predicates are compared with ``leq``; ``equivalent`` is the induced
    equivalence, which is what the suites compare against.
    """
    name = "doctrine"

    @abc.abstractmethod
    def predicates(self, A: FinPresheaf) -> Sequence[Any]: ...

    @abc.abstractmethod
    def leq(self, A: FinPresheaf, p: Any, q: Any) -> bool: ...

    @abc.abstractmethod
    def top(self, A: FinPresheaf) -> Any: ...

    @abc.abstractmethod
    def bottom(self, A: FinPresheaf) -> Any: ...

    @abc.abstractmethod
    def meet(self, A: FinPresheaf, p: Any, q: Any) -> Any: ...

    @abc.abstractmethod
    def join(self, A: FinPresheaf, p: Any, q: Any) -> Any: ...

    @abc.abstractmethod
    def implies(self, A: FinPresheaf, p: Any, q: Any) -> Any: ...

    @abc.abstractmethod
    def substitute(self, f: PsMap, p: Any) -> Any: ...

    @abc.abstractmethod
    def exists(self, f: PsMap, p: Any) -> Any: ...

    @abc.abstractmethod
    def forall(self, f: PsMap, p: Any) -> Any: ...

    @abc.abstractmethod
    def generic(self) -> Tuple[FinPresheaf, Any]:
        """The candidate generic predicate and the object carrying it."""

    def equivalent(self, A: FinPresheaf, p: Any, q: Any) -> bool:
        return self.leq(A, p, q) and self.leq(A, q, p)

    def describe(self, p: Any) -> str:
        return render_parts(p.labels()) if isinstance(p, Subobject) else repr(p)


class SubDoctrine(Doctrine):
    """Sub_ℰ: subobjects, pullback, image and the Kripke ∀."""
    name = "Sub"

    def __init__(self, ctx):
        self.ctx = ctx

    def predicates(self, A):
        return self.ctx.subobjects(A)

    def leq(self, A, p, q):
        return p.leq(q)

    def top(self, A):
        return Subobject.full(A)

    def bottom(self, A):
        return Subobject.empty(A)

    def meet(self, A, p, q):
        return HeytingOps(A).meet(p, q)

    def join(self, A, p, q):
        return HeytingOps(A).join(p, q)

    def implies(self, A, p, q):
        return HeytingOps(A).implies(p, q)

    def substitute(self, f, p):
        return substitute(self.ctx, f, p)

    def exists(self, f, p):
        return exists_along(self.ctx, f, p)

    def forall(self, f, p):
        return forall_along(self.ctx, f, p)

    def generic(self):
        Om = self.ctx.omega()
        return Om.obj, Subobject.from_mono(Om.truth)


class HeytingTransformation:
    """
    A family of maps D(A) -> E(A) between doctrines on the same index objects.

    ``check`` verifies that every component is a Heyting morphism and that
    the family commutes with substitution (and, on request, quantifiers).
    """

    def __init__(self, source: Doctrine, target: Doctrine,
                 component: Callable[[FinPresheaf, Any], Any], name: str = "transformation"):
        self.source = source
        self.target = target
        self.component = component
        self.name = name

    def __call__(self, A: FinPresheaf, p: Any) -> Any:
        return self.component(A, p)

    def check(self, objects: Iterable[FinPresheaf], maps: Iterable[PsMap],
              quantifiers: bool = False) -> Section:
        sec = Section(f"{self.name} is a Heyting transformation")
        S, T, eta = self.source, self.target, self.component
        for A in objects:
            preds = list(S.predicates(A))
            sec.add(f"top over {A.name}", T.equivalent(A, eta(A, S.top(A)), T.top(A)))
            sec.add(f"bottom over {A.name}", T.equivalent(A, eta(A, S.bottom(A)), T.bottom(A)))
            for op in ("meet", "join", "implies"):
                bad = next((
                    (p, q) for p in preds for q in preds
                    if not T.equivalent(A, eta(A, getattr(S, op)(A, p, q)),
                                        getattr(T, op)(A, eta(A, p), eta(A, q)))
                ), None)
                sec.add(f"{op} over {A.name}", bad is None,
                        None if bad is None else f"{S.describe(bad[0])} / {S.describe(bad[1])}")
        for f in maps:
            A, B = f.source, f.target
            bad = next((
                p for p in S.predicates(B)
                if not T.equivalent(A, eta(A, S.substitute(f, p)), T.substitute(f, eta(B, p)))
            ), None)
            sec.add(f"substitution along {A.name}->{B.name}", bad is None,
                    None if bad is None else S.describe(bad))
            if not quantifiers:
                continue
            for quant in ("exists", "forall"):
                bad = next((
                    p for p in S.predicates(A)
                    if not T.equivalent(B, eta(B, getattr(S, quant)(f, p)),
                                        getattr(T, quant)(f, eta(A, p)))
                ), None)
                sec.add(f"{quant} along {A.name}->{B.name}", bad is None,
                        None if bad is None else S.describe(bad))
        return sec


def check_beck_chevalley(ctx, D: Doctrine, sq: PullbackSquare) -> Section:
    """
    Compare ∃_top left* with right* ∃_bottom, and likewise for ∀, on every
    predicate over the bottom-left corner.

    Raises:
        NotAPullbackError: The square is not a pullback
    """
    why = is_pullback(ctx, sq)
    if why is not None:
        raise NotAPullbackError(f"Beck-Chevalley square is not a pullback: {why}")
    I = sq.bottom.source
    B = sq.right.source
    label = f"{sq.left.source.name}->{B.name} over {I.name}->{sq.bottom.target.name}"
    sec = Section(f"Beck-Chevalley ({D.name}) {label}")
    for quant in ("exists", "forall"):
        q = getattr(D, quant)
        bad = next((
            p for p in D.predicates(I)
            if not D.equivalent(B, q(sq.top, D.substitute(sq.left, p)),
                                D.substitute(sq.right, q(sq.bottom, p)))
        ), None)
        sec.add(quant, bad is None, None if bad is None else D.describe(bad))
    return sec


def check_generic_predicate(ctx, D: Doctrine, objects: Iterable[FinPresheaf]) -> Section:
    """
    Every predicate over every test object must be a substitution instance
    of the generic predicate along some map into its carrier.
    """
    G, T = D.generic()
    sec = Section(f"generic predicate ({D.name})")
    for A in objects:
        instances = [D.substitute(f, T) for f in ctx.hom_set(A, G)]
        missing = [
            p for p in D.predicates(A)
            if not any(D.equivalent(A, p, q) for q in instances)
        ]
        sec.add(f"every predicate over {A.name} is classified", not missing,
                None if not missing else f"{len(missing)} unclassified, e.g. {D.describe(missing[0])}")
    return sec


def check_heyting_laws(ctx, A: FinPresheaf) -> Section:
    """Lattice laws and residuation on Sub(A), exhaustively."""
    ops = sub_heyting(ctx, A)
    subs = ctx.subobjects(A)
    ctx.budget.check_enumeration(len(subs) ** 3, f"Heyting laws on Sub({A.name})")
    sec = Section(f"Heyting laws on Sub({A.name})")
    sec.note("subobjects", len(subs))
    sec.add("meet with top", all(ops.meet(ops.top(), S) == S for S in subs))
    sec.add("join with bottom", all(ops.join(ops.bottom(), S) == S for S in subs))
    sec.add("self implication is top", all(ops.implies(S, S) == ops.top() for S in subs))
    bad = next((
        (a, x, b) for a in subs for x in subs for b in subs
        if ops.meet(a, x).leq(b) != x.leq(ops.implies(a, b))
    ), None)
    sec.add("residuation", bad is None,
            None if bad is None else " ; ".join(render_parts(s.labels()) for s in bad))
    return sec


def check_adjunctions(ctx, D: Doctrine, maps: Iterable[PsMap]) -> Section:
    """∃_f ⊣ f* ⊣ ∀_f for every map, over all predicate pairs."""
    sec = Section(f"quantifier adjunctions ({D.name})")
    for f in maps:
        A, B = f.source, f.target
        pa, pb = D.predicates(A), D.predicates(B)
        ctx.budget.check_enumeration(len(pa) * len(pb), f"adjunctions along {A.name}->{B.name}")
        bad_e = next((
            (p, q) for p in pa for q in pb
            if D.leq(B, D.exists(f, p), q) != D.leq(A, p, D.substitute(f, q))
        ), None)
        bad_a = next((
            (p, q) for p in pa for q in pb
            if D.leq(A, D.substitute(f, q), p) != D.leq(B, q, D.forall(f, p))
        ), None)
        for label, bad in (("∃ ⊣ substitution", bad_e), ("substitution ⊣ ∀", bad_a)):
            sec.add(f"{label} along {A.name}->{B.name}", bad is None,
                    None if bad is None else f"{D.describe(bad[0])} / {D.describe(bad[1])}")
    return sec


def check_frobenius(ctx, D: Doctrine, maps: Iterable[PsMap]) -> Section:
    """∃_f(p ∧ f*q) = ∃_f(p) ∧ q."""
    sec = Section(f"Frobenius reciprocity ({D.name})")
    for f in maps:
        A, B = f.source, f.target
        bad = next((
            (p, q) for p in D.predicates(A) for q in D.predicates(B)
            if not D.equivalent(B, D.exists(f, D.meet(A, p, D.substitute(f, q))),
                                D.meet(B, D.exists(f, p), q))
        ), None)
        sec.add(f"along {A.name}->{B.name}", bad is None,
                None if bad is None else f"{D.describe(bad[0])} / {D.describe(bad[1])}")
    return sec


def check_substitution_heyting(ctx, D: Doctrine, maps: Iterable[PsMap]) -> Section:
    """f* preserves top, bottom, meet, join and implication."""
    sec = Section(f"substitution is a Heyting morphism ({D.name})")
    for f in maps:
        A, B = f.source, f.target
        sub = lambda p: D.substitute(f, p)  # noqa: E731
        preds = D.predicates(B)
        sec.add(f"top along {A.name}->{B.name}", D.equivalent(A, sub(D.top(B)), D.top(A)))
        sec.add(f"bottom along {A.name}->{B.name}",
                D.equivalent(A, sub(D.bottom(B)), D.bottom(A)))
        for op in ("meet", "join", "implies"):
            bad = next((
                (p, q) for p in preds for q in preds
                if not D.equivalent(A, sub(getattr(D, op)(B, p, q)),
                                    getattr(D, op)(A, sub(p), sub(q)))
            ), None)
            sec.add(f"{op} along {A.name}->{B.name}", bad is None,
                    None if bad is None else f"{D.describe(bad[0])} / {D.describe(bad[1])}")
    return sec


def check_quantifier_formulas(ctx, maps: Iterable[PsMap]) -> Section:
    """The closed ∃/∀ formulas agree with the adjoints found by search."""
    sec = Section("quantifiers match adjoint search")
    for f in maps:
        for S in ctx.subobjects(f.source):
            left = search_left_adjoint(ctx, f, S)
            right = search_right_adjoint(ctx, f, S)
            ok = left == exists_along(ctx, f, S) and right == forall_along(ctx, f, S)
            if not ok:
                sec.add(f"along {f.source.name}->{f.target.name}", False,
                        render_parts(S.labels()))
                break
        else:
            sec.add(f"along {f.source.name}->{f.target.name}", True)
    return sec


def check_de_morgan(ctx, maps: Iterable[PsMap]) -> Section:
    """Over a groupoid base: ∀_f(S) = ¬∃_f(¬S)."""
    sec = Section("De Morgan duality of quantifiers")
    for f in maps:
        src, tgt = HeytingOps(f.source), HeytingOps(f.target)
        bad = next((
            S for S in ctx.subobjects(f.source)
            if forall_along(ctx, f, S)
            != tgt.negate(exists_along(ctx, f, src.negate(S)))
        ), None)
        sec.add(f"along {f.source.name}->{f.target.name}", bad is None,
                None if bad is None else render_parts(bad.labels()))
    return sec


def pullback_squares(ctx, maps: Sequence[PsMap], limit: int = 64) -> List[PullbackSquare]:
    """Pullback squares of every cospan among the given maps, up to ``limit``."""
    out: List[PullbackSquare] = []
    for right in maps:
        for bottom in maps:
            if right.target != bottom.target:
                continue
            out.append(pullback_square(ctx, right, bottom))
            if len(out) >= limit:
                logger.info("pullback squares capped at %d", limit)
                return out
    return out
