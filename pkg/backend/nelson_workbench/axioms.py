"""
Evaluation of internal-language formulas in 𝔛*, and the three axiom checks:
transfer, standardisation and K-finite idealisation.
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Sequence, Tuple, Union

from nelson_workbench.doctrine import (
    HeytingOps,
    check_adjunctions,
    check_generic_predicate,
    check_substitution_heyting,
    exists_along,
    forall_along,
    substitute,
)
from nelson_workbench.errors import ShapeError, SortError, StructureError
from nelson_workbench.formula import (
    And, Atom, Bottom, Eq, Exists, Forall, Formula, Iff, Implies, Not, Or, St, Top,
    free_vars, parse,
)
from nelson_workbench.nelson import (
    ExternalPredicate,
    NelsonStructure,
    StandardDoctrine,
    StandardEmbedding,
    build_nelson,
    check_definition,
    check_sigma_adjunction,
    diamond,
    equiv_st,
    leq_st,
    sigma_exists,
    sigma_forall,
    standard_maps,
    standardise,
    standardise_matches,
    transfer_implies_containment,
)
from nelson_workbench.presheaf import FinPresheaf, PsMap, Subobject
from nelson_workbench.report import Report, Section, render_parts
from nelson_workbench.topos import PowerObject
from nelson_workbench.ultra import (
    FilterKind,
    InternalFilter,
    KFiniteObj,
    extend_to_ultrafilter,
    generated_filter,
    k_finite_object,
    with_flags,
)
from nelson_workbench.ultrapower import UltrapowerPath

logger = logging.getLogger(__name__)

Scope = Tuple[Tuple[str, FinPresheaf], ...]


@dataclass(frozen=True)
class Symbol:
    """A predicate symbol: its argument sorts and its interpretation."""
    sorts: Tuple[str, ...]
    pred: ExternalPredicate


class Interpretation:
    """
    Sorts and predicate symbols of a formula, interpreted in 𝔛*.

    A symbol of arity one lives over its sort, a symbol of higher arity over
    the product of its sorts, and a nullary symbol over 1.
    """

    def __init__(self, N: NelsonStructure, sorts: Optional[Mapping[str, FinPresheaf]] = None):
        self.N = N
        self.sorts: Dict[str, FinPresheaf] = dict(sorts or {})
        self.symbols: Dict[str, Symbol] = {}

    def sort(self, name: str) -> FinPresheaf:
        try:
            return self.sorts[name]
        except KeyError:
            raise SortError(f"unknown sort {name!r}")

    def domain(self, sorts: Sequence[str]) -> FinPresheaf:
        ctx = self.N.ctx
        if not sorts:
            return ctx.terminal()
        if len(sorts) == 1:
            return self.sort(sorts[0])
        return ctx.product_of([self.sort(s) for s in sorts]).apex

    def declare(self, name: str, sorts: Sequence[str],
                pred: Union[Subobject, ExternalPredicate]) -> "Interpretation":
        """Add a symbol; a standard subobject is embedded with i."""
        if name == "st":
            raise SortError("st is reserved")
        sorts = tuple(sorts)
        D = self.domain(sorts)
        if isinstance(pred, Subobject):
            if pred.ambient != D:
                raise SortError(f"{name} is not a subobject of {D.name}")
            pred = self.N.embed(pred)
        elif pred.over != D or pred.pred.ambient != self.N.star(D):
            raise SortError(f"{name} is not a predicate over {D.name}")
        self.symbols[name] = Symbol(sorts, pred)
        return self


def _lookup(scope: Scope, var: str) -> int:
    for n in range(len(scope) - 1, -1, -1):
        if scope[n][0] == var:
            return n
    raise SortError(f"unbound variable {var!r}")


class _Evaluator:
    def __init__(self, interp: Interpretation):
        self.I = interp
        self.N = interp.N
        self.ctx = interp.N.ctx

    def obj(self, scope: Scope) -> FinPresheaf:
        if not scope:
            return self.ctx.terminal()
        return self.ctx.product_of([A for _, A in scope]).apex

    def leg(self, scope: Scope, n: int) -> PsMap:
        return self.ctx.product_of([A for _, A in scope]).legs[n]

    def projection(self, scope: Scope) -> PsMap:
        """Γ, x:A -> Γ."""
        inner = scope[:-1]
        if not inner:
            return self.ctx.to_terminal(self.obj(scope))
        cone = self.ctx.product_of([A for _, A in inner])
        return self.ctx.tuple_map(cone, [self.leg(scope, n) for n in range(len(inner))])

    def standard(self, scope: Scope, n: int) -> Subobject:
        A = scope[n][1]
        return substitute(self.ctx, self.N.lift(self.leg(scope, n)), self.N.sigma(A).pred)

    def __call__(self, phi: Formula, scope: Scope) -> Subobject:
        ops = self.N.ops(self.obj(scope))
        if isinstance(phi, Top):
            return ops.top()
        if isinstance(phi, Bottom):
            return ops.bottom()
        if isinstance(phi, Atom):
            return self.atom(phi, scope)
        if isinstance(phi, St):
            return self.standard(scope, _lookup(scope, phi.var))
        if isinstance(phi, Eq):
            i, j = _lookup(scope, phi.left), _lookup(scope, phi.right)
            if scope[i][1] != scope[j][1]:
                raise SortError(f"{phi.left} and {phi.right} have different sorts")
            cone = self.ctx.equalizer(self.leg(scope, i), self.leg(scope, j))
            return self.N.embed(Subobject.from_mono(cone.legs[0])).pred
        if isinstance(phi, Not):
            return ops.negate(self(phi.body, scope))
        if isinstance(phi, (And, Or, Implies, Iff)):
            op = {And: ops.meet, Or: ops.join, Implies: ops.implies, Iff: ops.iff}[type(phi)]
            return op(self(phi.left, scope), self(phi.right, scope))
        if isinstance(phi, (Exists, Forall)):
            inner = scope + ((phi.var, self.I.sort(phi.sort)),)
            body = self(phi.body, inner)
            wide = self.N.ops(self.obj(inner))
            p = self.N.lift(self.projection(inner))
            if isinstance(phi, Exists):
                if phi.standard:
                    body = wide.meet(self.standard(inner, len(inner) - 1), body)
                return exists_along(self.ctx, p, body)
            if phi.standard:
                body = wide.implies(self.standard(inner, len(inner) - 1), body)
            return forall_along(self.ctx, p, body)
        raise TypeError(f"not a formula: {phi!r}")

    def atom(self, phi: Atom, scope: Scope) -> Subobject:
        sym = self.I.symbols.get(phi.name)
        if sym is None:
            raise SortError(f"unknown predicate {phi.name!r}")
        if len(sym.sorts) != len(phi.args):
            raise SortError(f"{phi.name} takes {len(sym.sorts)} arguments, got {len(phi.args)}")
        positions = [_lookup(scope, a) for a in phi.args]
        for a, n, s in zip(phi.args, positions, sym.sorts):
            if scope[n][1] != self.I.sort(s):
                raise SortError(f"argument {a} of {phi.name} should have sort {s}")
        if not positions:
            m = self.ctx.to_terminal(self.obj(scope))
        elif len(positions) == 1:
            m = self.leg(scope, positions[0])
        else:
            cone = self.ctx.product_of([self.I.sort(s) for s in sym.sorts])
            m = self.ctx.tuple_map(cone, [self.leg(scope, n) for n in positions])
        return substitute(self.ctx, self.N.lift(m), sym.pred.pred)


def evaluate(N: NelsonStructure, phi: Union[Formula, str], interp: Interpretation,
             env: Sequence[Tuple[str, str]] = ()) -> ExternalPredicate:
    """
    Interpret φ in 𝔛* over the context given by ``env``.

    Args:
        phi: Formula or formula text
        interp: Sorts and predicate symbols
        env: Free variables with their sort names, outermost first

    Returns:
        ExternalPredicate over the product of the context sorts (1 when closed)

    Raises:
        SortError: Unknown names, unbound variables or sort mismatches
    """
    if interp.N is not N:
        raise SortError("interpretation belongs to a different structure")
    if isinstance(phi, str):
        phi = parse(phi)
    scope: Scope = tuple((v, interp.sort(s)) for v, s in env)
    ev = _Evaluator(interp)
    return ExternalPredicate(ev.obj(scope), ev(phi, scope))


def holds(N: NelsonStructure, phi: Union[Formula, str], interp: Interpretation) -> bool:
    """Whether a closed formula evaluates to top in 𝔛*(1)."""
    if isinstance(phi, str):
        phi = parse(phi)
    loose = free_vars(phi)
    if loose:
        raise SortError(f"formula has free variables: {', '.join(sorted(loose))}")
    return evaluate(N, phi, interp).pred.is_full()


def graph(ctx, f: PsMap) -> Subobject:
    """The graph of f as a subobject of source × target."""
    cone = ctx.product(f.source, f.target)
    P = cone.apex
    return Subobject(P, tuple(
        frozenset(k for k in range(P.size(c)) if cone.legs[1](c, k) == f(c, cone.legs[0](c, k)))
        for c in range(len(ctx.base.objects))
    ))


EXISTENTIAL_TRANSFER = ("forall^st y:B. (exists x:A. F(x,y) & S(x)) "
                        "=> (exists^st x:A. F(x,y) & S(x))")
UNIVERSAL_TRANSFER = ("forall^st y:B. (forall^st x:A. F(x,y) => S(x)) "
                      "=> (forall x:A. F(x,y) => S(x))")
STANDARDISATION = "forall x:A. st(x) => (P(x) <=> D(x))"
IDEALISATION_HYPOTHESIS = "forall^st z:KA. exists y:B. forall x:A. (mem(x,z) => R(x,y))"
IDEALISATION_CONCLUSION = "exists y:B. forall^st x:A. R(x,y)"


def transfer_formulas(N: NelsonStructure, f: PsMap,
                      S: Subobject) -> Tuple[Interpretation, Formula, Formula]:
    """
    The existential and universal transfer sequents for S along f, with F
    the graph of f.
    """
    interp = Interpretation(N, {"A": f.source, "B": f.target})
    interp.declare("S", ("A",), S)
    interp.declare("F", ("A", "B"), graph(N.ctx, f))
    return interp, parse(EXISTENTIAL_TRANSFER), parse(UNIVERSAL_TRANSFER)


def standardisation_formula(N: NelsonStructure,
                            phi: ExternalPredicate) -> Tuple[Interpretation, Formula]:
    """x ∈ φ and x ∈ ◇φ agree on standard x."""
    interp = Interpretation(N, {"A": phi.over})
    interp.declare("P", ("A",), phi)
    interp.declare("D", ("A",), diamond(N, phi))
    return interp, parse(STANDARDISATION)


def check_transfer(N: NelsonStructure, f: PsMap, S: Subobject) -> Report:
    """
    Both transfer equivalences for S along f, the directions that hold for
    trivial reasons, and the internal-logic sequents.

    Raises:
        ShapeError: S is not over the source of f
    """
    if S.ambient != f.source:
        raise ShapeError("subobject is not over the map's source")
    ctx = N.ctx
    A, B = f.source, f.target
    label = render_parts(S.labels())
    rep = Report(f"transfer along {A.name}->{B.name} at {label}")
    iS = N.embed(S)
    i_ex, i_all = N.embed(exists_along(ctx, f, S)), N.embed(forall_along(ctx, f, S))
    s_ex, s_all = sigma_exists(N, f, iS), sigma_forall(N, f, iS)

    sec = rep.add(Section("transfer equivalences"))
    sec.add("existential", equiv_st(N, i_ex, s_ex), f"i(∃S) = {i_ex.describe()}, ∃^σ i(S) = {s_ex.describe()}")
    sec.add("universal", equiv_st(N, i_all, s_all), f"i(∀S) = {i_all.describe()}, ∀^σ i(S) = {s_all.describe()}")

    sec = rep.add(Section("trivial directions"))
    sec.add("∃^σ i(S) ≤^st i(∃S)", leq_st(N, s_ex, i_ex), s_ex.describe())
    sec.add("i(∀S) ≤^st ∀^σ i(S)", leq_st(N, i_all, s_all), i_all.describe())

    interp, ex, un = transfer_formulas(N, f, S)
    sec = rep.add(Section("internal-logic transfer"))
    sec.add("existential sequent", holds(N, ex, interp), str(ex))
    sec.add("universal sequent", holds(N, un, interp), str(un))
    return rep


def transfer_section(N: NelsonStructure, f: PsMap) -> Section:
    """check_transfer for every S over the source of f, one check per clause."""
    sec = Section(f"transfer along {f.source.name}->{f.target.name}")
    failures: Dict[str, str] = {}
    names: List[str] = []
    subs = N.ctx.subobjects(f.source)
    for S in subs:
        for part in check_transfer(N, f, S).sections:
            for chk in part.checks:
                key = f"{part.name}: {chk.name}"
                if key not in names:
                    names.append(key)
                if not chk.passed and key not in failures:
                    failures[key] = f"{render_parts(S.labels())}: {chk.witness}"
    sec.note("subobjects", len(subs))
    for key in names:
        sec.add(key, key not in failures, failures.get(key))
    return sec


def check_standardisation(N: NelsonStructure, A: FinPresheaf,
                          sample: Optional[Sequence[ExternalPredicate]] = None) -> Report:
    """
    Every external predicate W over A has a unique standard S with
    i(S) ≅^st W, and standardisation recovers S from i(S).

    Args:
        A: Standard object
        sample: Predicates to check (default: all of 𝔛*(A))

    Raises:
        BudgetExceeded: 𝔛*(A) × Sub(A) is too large to scan
    """
    ctx = N.ctx
    preds = list(N.predicates(A)) if sample is None else list(sample)
    subs = ctx.subobjects(A)
    ctx.budget.check_enumeration(len(preds) * len(subs), f"standardisation over {A.name}")
    rep = Report(f"standardisation over {A.name}")
    sec = rep.add(Section("existence and uniqueness"))
    sec.note("external predicates", len(preds))
    for W in preds:
        if W.over != A:
            raise ShapeError("sample predicate is not over the object")
        S = standardise(N, W)
        found = standardise_matches(N, W)
        tag = W.describe()
        sec.add(f"i(W^σ) ≅^st W at {tag}", equiv_st(N, N.embed(S), W), render_parts(S.labels()))
        sec.add(f"unique at {tag}", found == [S], f"{len(found)} standard matches")
    sec = rep.add(Section("standardisation splits i"))
    bad = next((S for S in subs if standardise(N, N.embed(S)) != S), None)
    sec.add(f"i(S)^σ = S over {A.name}", bad is None,
            None if bad is None else render_parts(bad.labels()))
    sec = rep.add(Section("internal-logic standardisation"))
    bad = None
    for W in preds:
        interp, phi = standardisation_formula(N, W)
        if not holds(N, phi, interp):
            bad = W
            break
    sec.add(f"over {A.name}", bad is None, None if bad is None else bad.describe())
    return rep


@dataclass(frozen=True)
class AdequateData:
    """The pieces of an adequate ultrapower for B."""
    B: FinPresheaf
    power: PowerObject
    K: KFiniteObj
    incl: PsMap

    @property
    def X(self) -> FinPresheaf:
        return self.incl.source


def _in_index_point(ctx, data: AdequateData, E: Subobject, c: int, j: int) -> bool:
    """Whether E ∈ x for the element x = j of X(c)."""
    name = ctx.subobject_name(E)
    P2 = data.K.power
    return P2.holds(c, data.incl(c, j), c, name.components[c][0], ctx.base.identities[c])


def upper_set(ctx, data: AdequateData, E: Subobject) -> Subobject:
    """E^!: the x ∈ X with E ∈ x."""
    X = data.X
    return Subobject(X, tuple(
        frozenset(j for j in range(X.size(c)) if _in_index_point(ctx, data, E, c, j))
        for c in range(len(ctx.base.objects))
    ))


def adequate_ultrapower(ctx, B: FinPresheaf, family: Sequence[FinPresheaf] = (),
                        check: bool = True) -> Tuple[FinPresheaf, InternalFilter, NelsonStructure]:
    """
    The adequate ultrapower for B on X = K(P(B)).

    U is the principal ultrafilter at the least global element lying in
    every E^!; the structure is built on the shortcut path.

    Raises:
        StructureError: No global element lies in every E^!
        BudgetExceeded: K(P(B)) is too large
    """
    P = ctx.power_object(B)
    K = k_finite_object(ctx, P.obj)
    X, incl = K.as_presheaf()
    data = AdequateData(B, P, K, incl)
    uppers = [upper_set(ctx, data, E) for E in ctx.subobjects(B)]
    F = generated_filter(ctx, X, uppers, label=f"adequate for {B.name}")
    U = extend_to_ultrafilter(ctx, F, verify=False)
    N = build_nelson(ctx, X, U, family=tuple(family) or (B,),
                     path=UltrapowerPath.shortcut, check=check)
    N.adequate = data
    logger.info("adequate ultrapower for %s: |X| = %d", B.name, X.size())
    return X, U, N


def realize_point(N: NelsonStructure, V: InternalFilter) -> PsMap:
    """
    A global element ξ of B^X/U with V = {E : ξ ∈ i(E)}.

    ξ is the class of x ↦ ξ_x, with ξ_x the least global element of
    ⋂{E ∈ x : E ∈ V}; for the principal U at x₀ that class is d_U(ξ_x₀).

    Raises:
        StructureError: N is not adequate, V is not ultra, or the
            recovered family differs from V
    """
    data: Optional[AdequateData] = N.adequate
    if data is None or N.U.kind != FilterKind.principal:
        raise StructureError("realize_point needs an adequate ultrapower")
    ctx, B = N.ctx, data.B
    if V.X != B:
        raise ShapeError(f"ultrafilter is not on {B.name}")
    V = with_flags(ctx, V)
    if not V.flags.is_ultra:
        raise StructureError("V is not an ultrafilter", V.describe())
    x0 = N.U.point
    ops = HeytingOps(B)
    Bx = ops.top()
    for E in ctx.subobjects(B):
        in_x0 = all(_in_index_point(ctx, data, E, c, comp[0]) for c, comp in enumerate(x0.components))
        if in_x0 and V.member(E, ctx):
            Bx = ops.meet(Bx, E)
    xi = next((g for g in ctx.global_elements(B)
               if all(comp[0] in Bx.parts[c] for c, comp in enumerate(g.components))), None)
    if xi is None:
        raise StructureError("no global element in B_x", render_parts(Bx.labels()))
    point = xi.then(N.diagonal(B))
    for E in ctx.subobjects(B):
        inside = all(comp[0] in N.embed(E).pred.parts[c] for c, comp in enumerate(point.components))
        if inside != V.member(E, ctx):
            raise StructureError("ξ does not realize V", render_parts(E.labels()))
    return point


@dataclass(frozen=True)
class IdealisationInstance:
    """An internal relation R ⊆ A × B with standard parameters."""
    A: FinPresheaf
    B: FinPresheaf
    R: Subobject


def k_membership(ctx, A: FinPresheaf) -> Tuple[FinPresheaf, Subobject]:
    """K(A) and the membership relation ∈ ⊆ A × K(A)."""
    K = k_finite_object(ctx, A)
    KA, incl = K.as_presheaf()
    cone = ctx.product(A, KA)
    P = cone.apex
    mem = Subobject(P, tuple(
        frozenset(
            k for k in range(P.size(c))
            if K.power.holds(c, incl(c, cone.legs[1](c, k)), c, cone.legs[0](c, k),
                             ctx.base.identities[c])
        )
        for c in range(len(ctx.base.objects))
    ))
    return KA, mem


def check_idealisation(N: NelsonStructure, inst: IdealisationInstance) -> Report:
    """
    Evaluate the hypothesis and conclusion of K-finite idealisation for R.

    The check passes when the hypothesis implies the conclusion.
    """
    ctx = N.ctx
    A, B, R = inst.A, inst.B, inst.R
    if R.ambient != ctx.product(A, B).apex:
        raise ShapeError("relation must be a subobject of A × B")
    hole = R.closure_witness()
    if hole is not None:
        raise ShapeError(f"relation is not a subobject: {hole}")
    KA, mem = k_membership(ctx, A)
    interp = Interpretation(N, {"A": A, "B": B, "KA": KA})
    interp.declare("R", ("A", "B"), R)
    interp.declare("mem", ("A", "KA"), mem)
    hyp = holds(N, IDEALISATION_HYPOTHESIS, interp)
    concl = holds(N, IDEALISATION_CONCLUSION, interp)
    rep = Report(f"idealisation for {render_parts(R.labels())}")
    sec = rep.add(Section("K-finite idealisation"))
    sec.note("hypothesis", hyp)
    sec.note("conclusion", concl)
    sec.add("hypothesis implies conclusion", concl or not hyp,
            f"{IDEALISATION_HYPOTHESIS} holds but {IDEALISATION_CONCLUSION} fails")
    return rep


def soundness_suite(N: NelsonStructure, objects: Optional[Sequence[FinPresheaf]] = None,
                    maps: Optional[Sequence[PsMap]] = None) -> Report:
    """
    The fixed soundness corpus: definition clauses, internal standardisation
    and transfer, the σ adjoint triple, Sub^st doctrine laws and the split
    embedding.
    """
    ctx = N.ctx
    objects = list(objects or N.family or (ctx.terminal(),))
    maps = standard_maps(ctx, objects) if maps is None else list(maps)
    rep = Report("soundness")
    rep.add(check_definition(N, objects, maps, heyting=not N.allow_proper))

    sec = rep.add(Section("internal-logic standardisation"))
    for A in objects:
        preds = N.predicates(A)
        if len(preds) > ctx.budget.max_enumeration:
            sec.skip(A.name, f"{len(preds)} predicates exceed the enumeration budget")
            continue
        bad = None
        for W in preds:
            interp, phi = standardisation_formula(N, W)
            if not holds(N, phi, interp):
                bad = W
                break
        sec.add(f"over {A.name}", bad is None, None if bad is None else bad.describe())

    sec = rep.add(Section("internal-logic transfer"))
    for f in maps:
        bad = None
        for S in ctx.subobjects(f.source):
            interp, ex, un = transfer_formulas(N, f, S)
            if not (holds(N, ex, interp) and holds(N, un, interp)):
                bad = S
                break
        sec.add(f"along {f.source.name}->{f.target.name}", bad is None,
                None if bad is None else render_parts(bad.labels()))

    rep.add(check_sigma_adjunction(N, maps))
    D = StandardDoctrine(N)
    rep.add(check_adjunctions(ctx, D, maps))
    rep.add(check_substitution_heyting(ctx, D, maps))
    rep.add(check_generic_predicate(ctx, D, objects))
    emb = StandardEmbedding(N)
    rep.add(emb.check(objects, maps))
    rep.add(emb.check_split(objects))
    rep.add(emb.factor_through_internal(objects))
    rep.add(transfer_implies_containment(N, objects))
    logger.info("soundness suite: %s", rep.summary())
    return rep
