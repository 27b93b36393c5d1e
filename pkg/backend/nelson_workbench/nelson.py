"""
Nelson structures from an ultrapower, and the nonstandard layer on top.

For a standard object A the external predicates are the subobjects of
A^X/U; σ_A = d_U(A) picks out the standard elements and i(S) = S^X/U embeds
standard predicates. The standard-elements order, the σ-quantifiers,
standardisation and the doctrine Sub^st are all computed from these.
"""
import logging
from dataclasses import dataclass
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

from nelson_workbench.doctrine import (
    Doctrine,
    HeytingOps,
    HeytingTransformation,
    SubDoctrine,
    exists_along,
    forall_along,
    substitute,
)
from nelson_workbench.errors import ShapeError, StructureError
from nelson_workbench.presheaf import FinPresheaf, PsMap, Subobject
from nelson_workbench.report import Section, render_parts
from nelson_workbench.ultra import FilterKind, InternalFilter, with_flags
from nelson_workbench.ultrapower import UltrapowerFunctor, UltrapowerPath

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ExternalPredicate:
    """A predicate of 𝔛*(A): a subobject of A^X/U for a standard A."""
    over: FinPresheaf
    pred: Subobject

    def describe(self) -> str:
        return render_parts(self.pred.labels())


class NelsonStructure:
    """
    The structure 𝔑_U: the ultrapower functor, σ and the embedding i.

    Attributes:
        ctx: The standard topos
        X: Index object of the ultrapower
        U: The filter on X
        functor: (-)^X/U with its bundle cache
        family: Objects the definition is checked on
        allow_proper: Whether a proper, non-ultra filter was accepted
    """

    def __init__(self, ctx, X: FinPresheaf, U: InternalFilter, functor: UltrapowerFunctor,
                 family: Sequence[FinPresheaf] = (), allow_proper: bool = False,
                 sigma_override: Optional[Dict[FinPresheaf, Subobject]] = None):
        self.ctx = ctx
        self.X = X
        self.U = U
        self.functor = functor
        self.family = tuple(family)
        self.allow_proper = allow_proper
        self._sigma_override = dict(sigma_override or {})
        self._lifted: Dict[PsMap, PsMap] = {}
        self._embedded: Dict[Subobject, Subobject] = {}
        self.adequate = None

    @property
    def path(self) -> UltrapowerPath:
        return self.functor.path

    def star(self, A: FinPresheaf) -> FinPresheaf:
        """A^X/U."""
        return self.functor.obj(A)

    def lift(self, f: PsMap) -> PsMap:
        """f^X/U."""
        hit = self._lifted.get(f)
        if hit is None:
            hit = self._lifted.setdefault(f, self.functor.lift(f))
        return hit

    def diagonal(self, A: FinPresheaf) -> PsMap:
        """d_U: A -> A^X/U."""
        return self.functor.bundle(A).diag_map

    def sigma(self, A: FinPresheaf) -> ExternalPredicate:
        """σ_A: the standard elements of A^X/U."""
        override = self._sigma_override.get(A)
        return ExternalPredicate(A, override if override is not None else self.functor.bundle(A).diag)

    def embed(self, S: Subobject) -> ExternalPredicate:
        """i(S) = S^X/U."""
        hit = self._embedded.get(S)
        if hit is None:
            hit = self._embedded.setdefault(S, self.functor.embed(S))
        return ExternalPredicate(S.ambient, hit)

    def external(self, A: FinPresheaf, pred: Subobject) -> ExternalPredicate:
        if pred.ambient != self.star(A):
            raise ShapeError(f"predicate is not over {A.name}^X/U")
        return ExternalPredicate(A, pred)

    def predicates(self, A: FinPresheaf) -> List[ExternalPredicate]:
        return [ExternalPredicate(A, p) for p in self.ctx.subobjects(self.star(A))]

    def ops(self, A: FinPresheaf) -> HeytingOps:
        return HeytingOps(self.star(A))

    def is_corrupted(self) -> bool:
        return bool(self._sigma_override)


def _same(phi: ExternalPredicate, psi: ExternalPredicate) -> None:
    if phi.over != psi.over or phi.pred.ambient != psi.pred.ambient:
        raise ShapeError("external predicates over different objects")


def build_nelson(ctx, X: FinPresheaf, U: InternalFilter, family: Sequence[FinPresheaf] = (),
                 maps: Optional[Sequence[PsMap]] = None,
                 path: UltrapowerPath = UltrapowerPath.auto,
                 allow_proper: bool = False, check: bool = True) -> NelsonStructure:
    """
    Assemble 𝔑_U and verify the clauses of the definition on the family.

    Args:
        X: Index object
        U: Filter on X; ultra, or merely proper when ``allow_proper``
        family: Objects to check the definition on
        maps: Standard maps to check lax naturality on (default: all maps
            among the family and into the terminal object)
        path: Ultrapower construction path
        allow_proper: Accept a proper filter that is not ultra
        check: Verify the definition at construction time

    Raises:
        StructureError: Non-groupoid base, unsuitable filter, or a violated
            clause (with the failing check as witness)
    """
    if U.X != X:
        raise ShapeError("filter does not live on the index object")
    if not ctx.base.is_groupoid():
        raise StructureError("Nelson structures need a groupoid base (internal choice)",
                             ctx.base.name)
    if U.flags is None and U.kind == FilterKind.principal:
        logger.info("accepting the principal filter on %s as ultra without classifying it", X.name)
    else:
        U = with_flags(ctx, U)
    if U.flags is not None:
        wanted = U.flags.is_proper if allow_proper else U.flags.is_ultra
        if not wanted:
            what = "a proper filter" if allow_proper else "an ultrafilter"
            raise StructureError(f"U is not {what}", U.describe())
    N = NelsonStructure(ctx, X, U, UltrapowerFunctor(ctx, U, path), family, allow_proper)
    if check:
        sec = check_definition(N, family, maps, heyting=not allow_proper)
        if sec.failures:
            bad = sec.failures[0]
            raise StructureError(f"Nelson structure clause fails: {bad.name}", bad.witness)
    logger.info("built Nelson structure on %s (%s path)", X.name, N.path.value)
    return N


def standard_maps(ctx, objects: Sequence[FinPresheaf], limit: int = 256) -> List[PsMap]:
    """All maps among the objects plus the maps to 1, up to ``limit``."""
    out: List[PsMap] = []
    seen = set()
    for A in objects:
        for B in list(objects) + [ctx.terminal()]:
            for f in ctx.hom_set(A, B):
                if f in seen:
                    continue
                seen.add(f)
                out.append(f)
                if len(out) >= limit:
                    logger.info("standard maps capped at %d", limit)
                    return out
    return out


def check_definition(N: NelsonStructure, objects: Sequence[FinPresheaf],
                     maps: Optional[Sequence[PsMap]] = None, heyting: bool = True) -> Section:
    """
    σ_1 is top, σ is lax natural and monic, and i: Sub -> 𝔛* is a Heyting
    transformation commuting with quantifiers.

    A proper filter that is not ultra breaks the last clause (i misses
    joins); ``heyting=False`` leaves it out.
    """
    ctx = N.ctx
    objects = list(objects)
    maps = standard_maps(ctx, objects) if maps is None else list(maps)
    sec = Section("Nelson structure definition")
    one = ctx.terminal()
    sec.add("σ at 1 is top", N.sigma(one).pred.is_full())
    for f in maps:
        A, B = f.source, f.target
        lax = N.sigma(A).pred.leq(substitute(ctx, N.lift(f), N.sigma(B).pred))
        sec.add(f"σ lax natural along {A.name}->{B.name}", lax,
                None if lax else f"σ_{A.name} = {N.sigma(A).describe()}")
    for A in objects:
        sec.add(f"d_U monic on {A.name}", N.diagonal(A).is_mono())
    if heyting:
        i = HeytingTransformation(SubDoctrine(ctx), ExternalDoctrine(N),
                                  lambda A, S: N.embed(S), name="i")
        sec.extend(i.check(objects, maps, quantifiers=True))
    return sec


def leq_st(N: NelsonStructure, phi: ExternalPredicate, psi: ExternalPredicate) -> bool:
    """φ ≤^st ψ: φ ∧ σ ≤ ψ."""
    _same(phi, psi)
    return N.ops(phi.over).meet(phi.pred, N.sigma(phi.over).pred).leq(psi.pred)


def equiv_st(N: NelsonStructure, phi: ExternalPredicate, psi: ExternalPredicate) -> bool:
    return leq_st(N, phi, psi) and leq_st(N, psi, phi)


def _check_source(f: PsMap, phi: ExternalPredicate) -> None:
    if phi.over != f.source:
        raise ShapeError("predicate is not over the map's source")


def sigma_exists(N: NelsonStructure, f: PsMap, phi: ExternalPredicate) -> ExternalPredicate:
    """∃^σ_f(φ) = ∃_{f^X/U}(σ ∧ φ)."""
    _check_source(f, phi)
    A = f.source
    body = N.ops(A).meet(N.sigma(A).pred, phi.pred)
    return ExternalPredicate(f.target, exists_along(N.ctx, N.lift(f), body))


def sigma_forall(N: NelsonStructure, f: PsMap, phi: ExternalPredicate) -> ExternalPredicate:
    """∀^σ_f(φ) = ∀_{f^X/U}(σ ⇒ φ)."""
    _check_source(f, phi)
    A = f.source
    body = N.ops(A).implies(N.sigma(A).pred, phi.pred)
    return ExternalPredicate(f.target, forall_along(N.ctx, N.lift(f), body))


def standardise(N: NelsonStructure, phi: ExternalPredicate) -> Subobject:
    """W^σ: σ_A ∧ φ pulled back along d_U to A."""
    A = phi.over
    both = N.ops(A).meet(N.sigma(A).pred, phi.pred)
    return substitute(N.ctx, N.diagonal(A), both)


def standardise_matches(N: NelsonStructure, phi: ExternalPredicate) -> List[Subobject]:
    """Every S ⊆ A with i(S) ≅^st φ, by exhaustive search."""
    return [S for S in N.ctx.subobjects(phi.over) if equiv_st(N, N.embed(S), phi)]


def standardise_is_unique(N: NelsonStructure, phi: ExternalPredicate) -> bool:
    found = standardise_matches(N, phi)
    return len(found) == 1 and found[0] == standardise(N, phi)


def diamond(N: NelsonStructure, phi: ExternalPredicate) -> ExternalPredicate:
    """◇φ = i(φ^σ)."""
    return N.embed(standardise(N, phi))


def st_exists(N: NelsonStructure, f: PsMap, S: Subobject) -> Subobject:
    """∃^st_f(S) = (∃^σ_f i(S))^σ."""
    if S.ambient != f.source:
        raise ShapeError("subobject is not over the map's source")
    return standardise(N, sigma_exists(N, f, N.embed(S)))


def st_forall(N: NelsonStructure, f: PsMap, S: Subobject) -> Subobject:
    """∀^st_f(S) = (∀^σ_f i(S))^σ."""
    if S.ambient != f.source:
        raise ShapeError("subobject is not over the map's source")
    return standardise(N, sigma_forall(N, f, N.embed(S)))


class ExternalDoctrine(Doctrine):
    """𝔛*: A ↦ Sub(A^X/U), reindexed along f^X/U."""
    name = "X*"

    def __init__(self, N: NelsonStructure):
        self.N = N

    def predicates(self, A):
        return self.N.predicates(A)

    def leq(self, A, p, q):
        _same(p, q)
        return p.pred.leq(q.pred)

    def top(self, A):
        return ExternalPredicate(A, self.N.ops(A).top())

    def bottom(self, A):
        return ExternalPredicate(A, self.N.ops(A).bottom())

    def meet(self, A, p, q):
        return ExternalPredicate(A, self.N.ops(A).meet(p.pred, q.pred))

    def join(self, A, p, q):
        return ExternalPredicate(A, self.N.ops(A).join(p.pred, q.pred))

    def implies(self, A, p, q):
        return ExternalPredicate(A, self.N.ops(A).implies(p.pred, q.pred))

    def substitute(self, f, p):
        return ExternalPredicate(f.source, substitute(self.N.ctx, self.N.lift(f), p.pred))

    def exists(self, f, p):
        return ExternalPredicate(f.target, exists_along(self.N.ctx, self.N.lift(f), p.pred))

    def forall(self, f, p):
        return ExternalPredicate(f.target, forall_along(self.N.ctx, self.N.lift(f), p.pred))

    def generic(self):
        Om = self.N.ctx.omega()
        return Om.obj, self.N.embed(Subobject.from_mono(Om.truth))

    def describe(self, p):
        return p.describe()


class StandardDoctrine(Doctrine):
    """
    Sub^st: standard subobjects ordered by ≤^st of their embeddings, with
    connectives and quantifiers computed in 𝔛* and standardised back.
    """
    name = "Sub^st"

    def __init__(self, N: NelsonStructure):
        self.N = N

    def _std(self, A, phi: Subobject) -> Subobject:
        return standardise(self.N, ExternalPredicate(A, phi))

    def predicates(self, A):
        return self.N.ctx.subobjects(A)

    def leq(self, A, p, q):
        return leq_st(self.N, self.N.embed(p), self.N.embed(q))

    def top(self, A):
        return Subobject.full(A)

    def bottom(self, A):
        return Subobject.empty(A)

    def meet(self, A, p, q):
        return self._std(A, self.N.ops(A).meet(self.N.embed(p).pred, self.N.embed(q).pred))

    def join(self, A, p, q):
        return self._std(A, self.N.ops(A).join(self.N.embed(p).pred, self.N.embed(q).pred))

    def implies(self, A, p, q):
        return self._std(A, self.N.ops(A).implies(self.N.embed(p).pred, self.N.embed(q).pred))

    def substitute(self, f, p):
        return substitute(self.N.ctx, f, p)

    def exists(self, f, p):
        return st_exists(self.N, f, p)

    def forall(self, f, p):
        return st_forall(self.N, f, p)

    def generic(self):
        Om = self.N.ctx.omega()
        return Om.obj, Subobject.from_mono(Om.truth)


class StandardEmbedding(HeytingTransformation):
    """
    i: Sub^st -> 𝔛*, split by standardisation and factoring through the
    internal predicates.
    """

    def __init__(self, N: NelsonStructure):
        super().__init__(StandardDoctrine(N), ExternalDoctrine(N),
                         lambda A, S: N.embed(S), name="i")
        self.N = N

    def splitting(self, A: FinPresheaf, phi: ExternalPredicate) -> Subobject:
        return standardise(self.N, phi)

    def check_split(self, objects: Iterable[FinPresheaf]) -> Section:
        sec = Section("standardisation splits i")
        for A in objects:
            bad = next((S for S in self.N.ctx.subobjects(A)
                        if self.splitting(A, self.N.embed(S)) != S), None)
            sec.add(f"over {A.name}", bad is None,
                    None if bad is None else render_parts(bad.labels()))
        return sec

    def factor_through_internal(self, objects: Iterable[FinPresheaf]) -> Section:
        """i(S) is the lifted characteristic map of S pulled back to the truth of Ω^X/U."""
        sec = Section("i factors through internal predicates")
        N, ctx = self.N, self.N.ctx
        truth = N.embed(Subobject.from_mono(ctx.omega().truth)).pred
        for A in objects:
            bad = next((
                S for S in ctx.subobjects(A)
                if substitute(ctx, N.lift(ctx.classify(S)), truth) != N.embed(S).pred
            ), None)
            sec.add(f"over {A.name}", bad is None,
                    None if bad is None else render_parts(bad.labels()))
        return sec


def export_subst_doctrine(N: NelsonStructure) -> StandardDoctrine:
    return StandardDoctrine(N)


def corrupt_sigma(N: NelsonStructure, A: Optional[FinPresheaf] = None,
                  replacement: Optional[Subobject] = None) -> NelsonStructure:
    """
    A copy of N whose σ at A (default: the terminal object) is replaced,
    by default with bottom.
    """
    A = A if A is not None else N.ctx.terminal()
    pred = replacement if replacement is not None else Subobject.empty(N.star(A))
    override = dict(N._sigma_override)
    override[A] = pred
    M = NelsonStructure(N.ctx, N.X, N.U, N.functor, N.family, N.allow_proper, override)
    M.adequate = N.adequate
    return M


def _enumerable(N: NelsonStructure, A: FinPresheaf, power: int, sec: Section) -> bool:
    count = len(N.ctx.subobjects(N.star(A))) ** power
    if count > N.ctx.budget.max_enumeration:
        sec.skip(A.name, f"{count} combinations exceed the enumeration budget")
        return False
    return True


def check_connectives_st(N: NelsonStructure, objects: Iterable[FinPresheaf]) -> Section:
    """For b ≤^st c: a⇒b ≤^st a⇒c, a∨b ≤^st a∨c and a∧b ≤^st a∧c."""
    sec = Section("connectives preserve ≤^st")
    for A in objects:
        if not _enumerable(N, A, 3, sec):
            continue
        ops = N.ops(A)
        preds = N.predicates(A)
        ext = lambda p: ExternalPredicate(A, p)  # noqa: E731
        for op in ("implies", "join", "meet"):
            f = getattr(ops, op)
            bad = next((
                (a, b, c) for b in preds for c in preds if leq_st(N, b, c)
                for a in preds
                if not leq_st(N, ext(f(a.pred, b.pred)), ext(f(a.pred, c.pred)))
            ), None)
            sec.add(f"{op} over {A.name}", bad is None,
                    None if bad is None else " / ".join(p.describe() for p in bad))
    return sec


def check_substitution_st(N: NelsonStructure, maps: Iterable[PsMap]) -> Section:
    """Substitution along f^X/U preserves ≤^st."""
    sec = Section("substitution preserves ≤^st")
    D = ExternalDoctrine(N)
    for f in maps:
        if not _enumerable(N, f.target, 2, sec):
            continue
        preds = N.predicates(f.target)
        bad = next((
            (p, q) for p in preds for q in preds
            if leq_st(N, p, q) and not leq_st(N, D.substitute(f, p), D.substitute(f, q))
        ), None)
        sec.add(f"along {f.source.name}->{f.target.name}", bad is None,
                None if bad is None else f"{bad[0].describe()} / {bad[1].describe()}")
    return sec


def check_sigma_quantifiers_st(N: NelsonStructure, maps: Iterable[PsMap]) -> Section:
    """∃^σ_f and ∀^σ_f preserve ≤^st."""
    sec = Section("σ-quantifiers preserve ≤^st")
    for f in maps:
        if not _enumerable(N, f.source, 2, sec):
            continue
        preds = N.predicates(f.source)
        for label, q in (("∃^σ", sigma_exists), ("∀^σ", sigma_forall)):
            bad = next((
                (p, r) for p in preds for r in preds
                if leq_st(N, p, r) and not leq_st(N, q(N, f, p), q(N, f, r))
            ), None)
            sec.add(f"{label} along {f.source.name}->{f.target.name}", bad is None,
                    None if bad is None else f"{bad[0].describe()} / {bad[1].describe()}")
    return sec


def check_sigma_adjunction(N: NelsonStructure, maps: Iterable[PsMap]) -> Section:
    """∃^σ_f ⊣ f* ⊣ ∀^σ_f with respect to ≤^st."""
    sec = Section("σ-quantifiers form an adjoint triple")
    D = ExternalDoctrine(N)
    for f in maps:
        A, B = f.source, f.target
        count = len(N.ctx.subobjects(N.star(A))) * len(N.ctx.subobjects(N.star(B)))
        if count > N.ctx.budget.max_enumeration:
            sec.skip(f"{A.name}->{B.name}", f"{count} pairs exceed the enumeration budget")
            continue
        pa, pb = N.predicates(A), N.predicates(B)
        bad_e = next((
            (p, q) for p in pa for q in pb
            if leq_st(N, sigma_exists(N, f, p), q) != leq_st(N, p, D.substitute(f, q))
        ), None)
        bad_a = next((
            (p, q) for p in pa for q in pb
            if leq_st(N, D.substitute(f, q), p) != leq_st(N, q, sigma_forall(N, f, p))
        ), None)
        for label, bad in (("∃^σ ⊣ substitution", bad_e), ("substitution ⊣ ∀^σ", bad_a)):
            sec.add(f"{label} along {A.name}->{B.name}", bad is None,
                    None if bad is None else f"{bad[0].describe()} / {bad[1].describe()}")
    return sec


def check_standardisation_functor(N: NelsonStructure, objects: Iterable[FinPresheaf],
                                  maps: Iterable[PsMap]) -> Section:
    """Standardisation sends ∧, ∨, ⇒ to ∩, ∪, ⇒ and commutes with substitution."""
    sec = Section("standardisation preserves connectives")
    for A in objects:
        if not _enumerable(N, A, 2, sec):
            continue
        ext, std = N.ops(A), HeytingOps(A)
        preds = N.predicates(A)
        for op in ("meet", "join", "implies"):
            bad = next((
                (p, q) for p in preds for q in preds
                if standardise(N, ExternalPredicate(A, getattr(ext, op)(p.pred, q.pred)))
                != getattr(std, op)(standardise(N, p), standardise(N, q))
            ), None)
            sec.add(f"{op} over {A.name}", bad is None,
                    None if bad is None else f"{bad[0].describe()} / {bad[1].describe()}")
    D = ExternalDoctrine(N)
    for f in maps:
        if not _enumerable(N, f.target, 1, sec):
            continue
        bad = next((
            p for p in N.predicates(f.target)
            if standardise(N, D.substitute(f, p)) != substitute(N.ctx, f, standardise(N, p))
        ), None)
        sec.add(f"natural along {f.source.name}->{f.target.name}", bad is None,
                None if bad is None else bad.describe())
    return sec


def transfer_implies_containment(N: NelsonStructure, objects: Iterable[FinPresheaf]) -> Section:
    """i(S) ≤^st i(T) iff i(S) ≤ i(T), for standard S, T."""
    sec = Section("standard predicates have the same standard elements")
    for A in objects:
        subs = N.ctx.subobjects(A)
        bad = next((
            (S, T) for S in subs for T in subs
            if leq_st(N, N.embed(S), N.embed(T)) != N.embed(S).pred.leq(N.embed(T).pred)
        ), None)
        sec.add(f"over {A.name}", bad is None,
                None if bad is None else
                f"{render_parts(bad[0].labels())} / {render_parts(bad[1].labels())}")
    return sec


def quantifiers_commute_with_i(N: NelsonStructure, maps: Iterable[PsMap]) -> Tuple[bool, Optional[str]]:
    """Whether i(∃_f S) = ∃_{f^X/U} i(S) and i(∀_f S) = ∀_{f^X/U} i(S) for all S."""
    ctx = N.ctx
    for f in maps:
        lifted = N.lift(f)
        for S in ctx.subobjects(f.source):
            iS = N.embed(S).pred
            if N.embed(exists_along(ctx, f, S)).pred != exists_along(ctx, lifted, iS):
                return False, f"∃ along {f.source.name}->{f.target.name} at {render_parts(S.labels())}"
            if N.embed(forall_along(ctx, f, S)).pred != forall_along(ctx, lifted, iS):
                return False, f"∀ along {f.source.name}->{f.target.name} at {render_parts(S.labels())}"
    return True, None


def transfer_holds(N: NelsonStructure, f: PsMap, S: Subobject) -> Tuple[bool, Optional[str]]:
    """i(∃_f S) ≅^st ∃^σ_f i(S) and i(∀_f S) ≅^st ∀^σ_f i(S)."""
    ctx = N.ctx
    iS = N.embed(S)
    if not equiv_st(N, N.embed(exists_along(ctx, f, S)), sigma_exists(N, f, iS)):
        return False, f"existential transfer at {render_parts(S.labels())}"
    if not equiv_st(N, N.embed(forall_along(ctx, f, S)), sigma_forall(N, f, iS)):
        return False, f"universal transfer at {render_parts(S.labels())}"
    return True, None


def check_quantifier_preservation_gives_transfer(N: NelsonStructure, maps: Sequence[PsMap],
                                                 assume_premise: bool = False) -> Section:
    """
    If i commutes with ∃ and ∀ along the maps, transfer holds along them.

    With ``assume_premise`` the transfer check must pass outright;
    otherwise it only has to pass when the premise is observed to hold.
    """
    sec = Section("quantifier preservation gives transfer")
    premise, why = quantifiers_commute_with_i(N, maps)
    sec.note("premise holds", premise)
    if why is not None:
        sec.note("premise fails at", why)
    for f in maps:
        bad = None
        for S in N.ctx.subobjects(f.source):
            ok, bad = transfer_holds(N, f, S)
            if not ok:
                break
        required = assume_premise or premise
        sec.add(f"transfer along {f.source.name}->{f.target.name}", bad is None or not required, bad)
    return sec
