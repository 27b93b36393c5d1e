"""
Internal filters and ultrafilters on an object X, and K-finite subobjects.

A filter is kept intensionally (a point, or the meet of its generators) and
can always be materialized as a subobject of PX ≅ Ω^X. The flags are
decided on the extensional form by checking, stage by stage, what its
classifying map does to meets, implications and the existential image.
"""
import enum
import logging
from dataclasses import dataclass, replace
from typing import List, Optional, Sequence, Tuple

from nelson_workbench.doctrine import HeytingOps
from nelson_workbench.errors import ShapeError, StructureError
from nelson_workbench.presheaf import FinPresheaf, PsMap, Subobject
from nelson_workbench.report import Section, render_label, render_parts
from nelson_workbench.topos import PowerObject

logger = logging.getLogger(__name__)


class FilterKind(str, enum.Enum):
    principal = "principal"
    generated = "generated"
    extensional = "extensional"


@dataclass(frozen=True)
class FilterReport:
    is_filter: bool
    is_proper: bool
    is_ultra: bool
    witnesses: Tuple[str, ...] = ()

    def to_section(self, name: str) -> Section:
        sec = Section(name)
        sec.note("filter", self.is_filter)
        sec.note("proper", self.is_proper)
        sec.note("ultra", self.is_ultra)
        for n, w in enumerate(self.witnesses, 1):
            sec.note(f"witness {n}", w)
        return sec


@dataclass(frozen=True)
class InternalFilter:
    """
    A filter on X in one of three presentations.

    Attributes:
        X: The object the filter lives on
        kind: principal (``point``), generated (``meet``) or extensional
        point: Global element 1 -> X for principal filters
        meet: Intersection of the generators for generated filters
        extensional: Subobject of PX for extensional filters
        label: Display name
        flags: Result of ``classify_filter`` once computed
    """
    X: FinPresheaf
    kind: FilterKind
    point: Optional[PsMap] = None
    meet: Optional[Subobject] = None
    extensional: Optional[Subobject] = None
    label: str = ""
    flags: Optional[FilterReport] = None

    def member(self, S: Subobject, ctx=None) -> bool:
        """Whether the subobject S of X belongs to the filter."""
        if S.ambient != self.X:
            raise ShapeError(f"subobject is not over {self.X.name!r}")
        if self.kind == FilterKind.principal:
            return all(comp[0] in S.parts[c] for c, comp in enumerate(self.point.components))
        if self.kind == FilterKind.generated:
            return self.meet.leq(S)
        if ctx is None:
            raise ValueError("extensional membership needs a topos context")
        name = ctx.subobject_name(S)
        return all(comp[0] in self.extensional.parts[c] for c, comp in enumerate(name.components))

    def as_subobject(self, ctx) -> Subobject:
        """The filter as a subobject of PX."""
        if self.kind == FilterKind.extensional:
            return self.extensional
        P = ctx.power_object(self.X)
        base = ctx.base
        parts = []
        for c in range(len(base.objects)):
            if self.kind == FilterKind.principal:
                x0 = self.point.components[c][0]
                ident = base.identities[c]
                parts.append(frozenset(
                    k for k in range(len(P.parts[c])) if P.holds(c, k, c, x0, ident)
                ))
            else:
                required = [
                    (base.dom[v], P.pair(c, base.dom[v], x, v))
                    for v in base.into[c] for x in self.meet.parts[base.dom[v]]
                ]
                parts.append(frozenset(
                    k for k, s in enumerate(P.parts[c])
                    if all(j in s.parts[d] for d, j in required)
                ))
        return Subobject(P.obj, tuple(parts))

    @property
    def is_ultra(self) -> Optional[bool]:
        return None if self.flags is None else self.flags.is_ultra

    def describe(self) -> str:
        if self.kind == FilterKind.principal:
            pt = ", ".join(render_label(self.X.label(c, comp[0]))
                           for c, comp in enumerate(self.point.components))
            return f"principal at ({pt})"
        if self.kind == FilterKind.generated:
            return f"generated by {render_parts(self.meet.labels())}"
        return f"extensional {render_parts(self.extensional.labels())}"


def _sieve_implies(base, c: int, S: frozenset, T: frozenset) -> frozenset:
    return frozenset(
        u for u in base.into[c]
        if all(base.compose(u, w) not in S or base.compose(u, w) in T
               for w in base.into[base.dom[u]])
    )


def classify_filter(ctx, U: InternalFilter) -> FilterReport:
    """
    Decide the filter, proper and ultra flags on the extensional form.

    At every stage c and for all s, t in PX(c): χ_U(s ∧ t) = χ_U(s) ∩ χ_U(t)
    and top ∈ U (filter); χ_U(s) ⊆ ∃x.s (proper); and, for an ultrafilter,
    χ_U(s ⇒ t) = χ_U(s) ⇒ χ_U(t).
    """
    X = U.X
    base = ctx.base
    P = ctx.power_object(X)
    Om = ctx.omega()
    E = U.as_subobject(ctx)
    chi = ctx.classify(E)
    ctx.budget.check_enumeration(sum(len(ps) ** 2 for ps in P.parts), "filter pairs")
    witnesses: List[str] = []

    def sieve(c: int, k: int) -> frozenset:
        return Om.sieves[c][chi(c, k)]

    is_filter = is_proper = implies_ok = True
    for c, o in enumerate(base.objects):
        stage = P.stages[c].apex
        ops = HeytingOps(stage)
        full = P.index_of(c, Subobject.full(stage))
        if full not in E.parts[c]:
            is_filter = False
            witnesses.append(f"top is missing at {o}")
        # the morphism v of each pair (x, v), stage by stage
        mor_of = [
            [base.mor_index(stage.label(d, k)[1]) for k in range(stage.size(d))]
            for d in range(len(base.objects))
        ]
        parts = P.parts[c]
        for k, s in enumerate(parts):
            exists = frozenset(mor_of[d][j] for d, p in enumerate(s.parts) for j in p)
            if is_proper and not sieve(c, k) <= exists:
                is_proper = False
                witnesses.append(f"not proper at {o}: {render_label(P.obj.label(c, k))}")
            for k2, t in enumerate(parts):
                if is_filter:
                    m = P.index_of(c, ops.meet(s, t))
                    if sieve(c, m) != sieve(c, k) & sieve(c, k2):
                        is_filter = False
                        witnesses.append(
                            f"meet not preserved at {o}: {render_label(P.obj.label(c, k))}"
                            f" and {render_label(P.obj.label(c, k2))}"
                        )
                if implies_ok:
                    i = P.index_of(c, ops.implies(s, t))
                    if sieve(c, i) != _sieve_implies(base, c, sieve(c, k), sieve(c, k2)):
                        implies_ok = False
                        witnesses.append(
                            f"implication not preserved at {o}: {render_label(P.obj.label(c, k))}"
                            f" and {render_label(P.obj.label(c, k2))}"
                        )
    is_proper = is_filter and is_proper
    report = FilterReport(is_filter, is_proper, is_proper and implies_ok, tuple(witnesses))
    logger.debug("classified %s: %s", U.describe(), report)
    return report


def with_flags(ctx, U: InternalFilter) -> InternalFilter:
    """U with ``flags`` filled in (computed at most once)."""
    if U.flags is not None:
        return U
    return replace(U, flags=classify_filter(ctx, U))


def check_forms_agree(ctx, U: InternalFilter) -> Section:
    """The intensional membership test agrees with the extensional form on Sub(X)."""
    E = InternalFilter(U.X, FilterKind.extensional, extensional=U.as_subobject(ctx))
    sec = Section(f"filter forms agree ({U.describe()})")
    bad = next((
        S for S in ctx.subobjects(U.X) if U.member(S, ctx) != E.member(S, ctx)
    ), None)
    sec.add("membership", bad is None, None if bad is None else render_parts(bad.labels()))
    return sec


def filter_from_subobject(ctx, X: FinPresheaf, E: Subobject, label: str = "") -> InternalFilter:
    P = ctx.power_object(X)
    if E.ambient != P.obj:
        raise ShapeError("an extensional filter must be a subobject of PX")
    return InternalFilter(X, FilterKind.extensional, extensional=E, label=label)


def principal_ultrafilter(ctx, x: PsMap, verify: bool = True, label: str = "") -> InternalFilter:
    """
    The filter of subobjects through which the global element x factors.

    Args:
        x: Global element 1 -> X
        verify: Run ``classify_filter`` and store the flags
    """
    if any(len(ls) != 1 for ls in x.source.carrier):
        raise ShapeError("principal filters need a global element 1 -> X")
    U = InternalFilter(x.target, FilterKind.principal, point=x, label=label)
    return with_flags(ctx, U) if verify else U


def generated_filter(ctx, X: FinPresheaf, generators: Sequence[Subobject],
                     label: str = "") -> InternalFilter:
    """The filter of subobjects above the meet of the generators."""
    M = Subobject.full(X)
    ops = HeytingOps(X)
    for G in generators:
        M = ops.meet(M, G)
    return InternalFilter(X, FilterKind.generated, meet=M, label=label)


def extend_to_ultrafilter(ctx, F: InternalFilter, verify: bool = True) -> InternalFilter:
    """
    The principal ultrafilter at the canonically least global element of
    the meet of F.

    Raises:
        StructureError: F has no global element in its meet
    """
    if F.kind == FilterKind.principal:
        M = Subobject.generated(F.X, [(c, comp[0]) for c, comp in enumerate(F.point.components)])
    elif F.kind == FilterKind.generated:
        M = F.meet
    else:
        raise StructureError("only principal or generated filters can be extended")
    for x in ctx.global_elements(F.X):
        if all(comp[0] in M.parts[c] for c, comp in enumerate(x.components)):
            logger.info("extending %s to the point %s", F.describe(), x.components)
            return principal_ultrafilter(ctx, x, verify=verify, label=F.label)
    raise StructureError("filter cannot be extended to an ultrafilter",
                         f"no global element in {render_parts(M.labels())}")


def enumerate_internal_ultrafilters(ctx, X: FinPresheaf) -> List[InternalFilter]:
    """
    Every internal ultrafilter on X, in canonical order.

    Candidates are all subobjects of PX that contain top at every stage;
    each is classified, and the ultra ones are named by a point when they
    coincide with a principal ultrafilter.
    """
    P = ctx.power_object(X)
    full = [P.index_of(c, Subobject.full(st.apex)) for c, st in enumerate(P.stages)]
    principal = {}
    for x in ctx.global_elements(X):
        pf = InternalFilter(X, FilterKind.principal, point=x)
        principal.setdefault(pf.as_subobject(ctx), pf)
    found: List[InternalFilter] = []
    candidates = ctx.subobjects(P.obj)
    for E in candidates:
        if any(full[c] not in part for c, part in enumerate(E.parts)):
            continue
        U = filter_from_subobject(ctx, X, E)
        flags = classify_filter(ctx, U)
        if not flags.is_ultra:
            continue
        named = principal.get(E)
        found.append(replace(named, flags=flags) if named is not None else replace(U, flags=flags))
    logger.info("%d internal ultrafilters on %s (%d candidates)", len(found), X.name, len(candidates))
    return found


@dataclass(frozen=True)
class KFiniteObj:
    """K(A) as a subobject of PA."""
    A: FinPresheaf
    power: PowerObject
    KA: Subobject

    def as_presheaf(self) -> Tuple[FinPresheaf, PsMap]:
        return self.KA.as_presheaf(f"K({self.A.name})")


def k_finite_object(ctx, A: FinPresheaf) -> KFiniteObj:
    """
    Close {∅} ∪ {singletons} under binary union, stage by stage.

    The singleton of a ∈ A(c) is the subobject of A × y(c) generated by
    (a, id_c).
    """
    P = ctx.power_object(A)
    base = ctx.base
    parts = []
    for c in range(len(base.objects)):
        stage = P.stages[c].apex
        ident = base.identities[c]
        seeds = {P.index_of(c, Subobject.empty(stage))}
        for a in range(A.size(c)):
            single = Subobject.generated(stage, [(c, P.pair(c, c, a, ident))])
            seeds.add(P.index_of(c, single))
        closed = set(seeds)
        frontier = set(seeds)
        while frontier:
            new = set()
            for k in frontier:
                for k2 in list(closed):
                    s, t = P.parts[c][k], P.parts[c][k2]
                    j = P.index_of(c, Subobject(stage, tuple(p | q for p, q in zip(s.parts, t.parts))))
                    if j not in closed:
                        new.add(j)
            closed |= new
            frontier = new
        parts.append(frozenset(closed))
    KA = Subobject(P.obj, tuple(parts))
    logger.info("K(%s): %d of %d elements", A.name, KA.size(), P.obj.size())
    return KFiniteObj(A, P, KA)


def is_k_finite(ctx, A: FinPresheaf) -> bool:
    """Whether top of A lies in K(A) at every stage."""
    K = k_finite_object(ctx, A)
    P = K.power
    return all(
        P.index_of(c, Subobject.full(st.apex)) in K.KA.parts[c]
        for c, st in enumerate(P.stages)
    )
