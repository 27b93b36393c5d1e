"""
Ultrapowers A^X/U and the diagonal d_U: A -> A^X/U.

The explicit path follows the construction step by step: partial maps
X ⇀ A as elements of Ã^X, those whose domain of definition lies in U, the
agreement relation K_U, and the coequalizer of its projections. The
shortcut path handles a principal U at x₀ directly: A^X/U is A itself and
a class is read off by evaluating at x₀.
"""
import enum
import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Dict, Iterable, Optional, Sequence, Tuple

from nelson_workbench.doctrine import HeytingOps, exists_along
from nelson_workbench.errors import BudgetExceeded, ShapeError, StructureError
from nelson_workbench.presheaf import FinPresheaf, PsMap, Subobject
from nelson_workbench.report import Section, render_parts
from nelson_workbench.topos import Exponential, Representer
from nelson_workbench.ultra import FilterKind, InternalFilter
from nelson_workbench.validate import validate_map

logger = logging.getLogger(__name__)


class UltrapowerPath(str, enum.Enum):
    explicit = "explicit"
    shortcut = "shortcut"
    auto = "auto"


@dataclass(frozen=True)
class UltrapowerBundle:
    """
    Everything built on the way to A^X/U.

    Attributes:
        A: The standard object
        U: The filter
        path: explicit or shortcut
        result: A^X/U
        diag_map: d_U: A -> A^X/U
        diag: d_U(A) as a subobject of A^X/U
        representer: Ã (explicit path)
        exponential: Ã^X (explicit path)
        over_U: Ã^X/U as a subobject of Ã^X (explicit path)
        KU: Pairs with agreement domain in U, as a subobject of (Ã^X/U)² (explicit path)
        q: Ã^X/U -> A^X/U, the coequalizer (explicit path)
    """
    A: FinPresheaf
    U: InternalFilter
    path: UltrapowerPath
    result: FinPresheaf
    diag_map: PsMap
    diag: Subobject
    representer: Optional[Representer] = None
    exponential: Optional[Exponential] = None
    over_U: Optional[Subobject] = None
    KU: Optional[Subobject] = None
    q: Optional[PsMap] = None

    @property
    def AtildeX(self) -> Optional[FinPresheaf]:
        return None if self.exponential is None else self.exponential.obj

    def over_U_presheaf(self) -> Tuple[FinPresheaf, PsMap]:
        return self.over_U.as_presheaf(f"~{self.A.name}^X/U")

    @cached_property
    def _positions(self) -> Tuple[Dict[int, int], ...]:
        return tuple({k: n for n, k in enumerate(sorted(p))} for p in self.over_U.parts)

    def position(self, c: int, k: int) -> int:
        """Index in Ã^X/U(c) of the k-th element of Ã^X(c)."""
        return self._positions[c][k]

    def class_of(self, c: int, k: int) -> int:
        """The element of A^X/U(c) represented by the k-th element of Ã^X(c)."""
        return self.q(c, self.position(c, k))


def intersect_tilde(ctx, A: FinPresheaf) -> PsMap:
    """∩̃: Ã × Ã -> Ã, defined where both arguments are defined and agree."""
    return ctx.intersect_tilde(A)


def _exponent(ctx, A: FinPresheaf, X: FinPresheaf) -> int:
    return ctx.partial_map_representer(A).obj.size() ** X.size()


def resolve_path(ctx, A: FinPresheaf, U: InternalFilter, path: UltrapowerPath) -> UltrapowerPath:
    path = UltrapowerPath(path)
    if path == UltrapowerPath.shortcut and U.kind != FilterKind.principal:
        raise StructureError("the shortcut ultrapower needs a principal filter", U.describe())
    if path == UltrapowerPath.auto:
        if U.kind != FilterKind.principal:
            return UltrapowerPath.explicit
        if _exponent(ctx, A, U.X) <= ctx.budget.max_exponent:
            return UltrapowerPath.explicit
        return UltrapowerPath.shortcut
    if path == UltrapowerPath.explicit:
        n = _exponent(ctx, A, U.X)
        if n > ctx.budget.max_exponent:
            raise BudgetExceeded(
                f"|~{A.name}|^|{U.X.name}| = {n} exceeds the exponent budget {ctx.budget.max_exponent}"
            )
    return path


def build_ultrapower(ctx, A: FinPresheaf, U: InternalFilter,
                     path: UltrapowerPath = UltrapowerPath.auto) -> UltrapowerBundle:
    """
    Build A^X/U.

    Args:
        A: Standard object
        U: Filter on X (must contain top)
        path: explicit, shortcut (principal U only) or auto

    Returns:
        UltrapowerBundle

    Raises:
        BudgetExceeded: Ã^X is too large for the explicit path
        StructureError: Shortcut requested for a non-principal filter, or
            constant maps are not in Ã^X/U
    """
    path = resolve_path(ctx, A, U, path)
    if path == UltrapowerPath.shortcut:
        ident = PsMap.identity(A)
        return UltrapowerBundle(A, U, path, A, ident, Subobject.full(A))
    return _build_explicit(ctx, A, U)


def _build_explicit(ctx, A: FinPresheaf, U: InternalFilter) -> UltrapowerBundle:
    X = U.X
    base = ctx.base
    R = ctx.partial_map_representer(A)
    E = ctx.exponential(X, R.obj)
    P = ctx.power_object(X)
    EU = U.as_subobject(ctx)
    logger.info("explicit ultrapower of %s over %s: |~A^X| = %d", A.name, X.name, E.obj.size())

    def domain(c: int, theta: PsMap) -> Subobject:
        stage = E.stages[c].apex
        return Subobject(stage, tuple(
            frozenset(j for j, t in enumerate(theta.components[d]) if R.is_total(d, t))
            for d in range(len(base.objects))
        ))

    over = Subobject(E.obj, tuple(
        frozenset(k for k, theta in enumerate(E.maps[c])
                  if P.index_of(c, domain(c, theta)) in EU.parts[c])
        for c in range(len(base.objects))
    ))
    OU, incl = over.as_presheaf(f"~{A.name}^X/U")
    sq = ctx.product(OU, OU)
    KU = Subobject(sq.apex, tuple(
        frozenset(
            k for k in range(sq.apex.size(c))
            if _agreement_in_U(ctx, E, P, EU, R, c,
                               incl(c, sq.legs[0](c, k)), incl(c, sq.legs[1](c, k)))
        )
        for c in range(len(base.objects))
    ))
    K, kincl = KU.as_presheaf(f"K_U({A.name})")
    Q, q = ctx.coequalizer(kincl.then(sq.legs[0]), kincl.then(sq.legs[1]))
    Q = FinPresheaf(Q.base, Q.carrier, Q.action, f"{A.name}^X/U")
    q = PsMap(OU, Q, q.components)

    # d_U: a ↦ class of the constant partial map (x, v) ↦ η(A(v) a)
    diag = []
    for c in range(len(base.objects)):
        stage = E.stages[c].apex
        row = []
        for a in range(A.size(c)):
            comps = tuple(
                tuple(R.eta(d, A.action[base.mor_index(stage.label(d, j)[1])][a])
                      for j in range(stage.size(d)))
                for d in range(len(base.objects))
            )
            k = E.index_of(c, comps)
            if k not in over.parts[c]:
                raise StructureError("constant maps are not in ~A^X/U; the filter must contain top")
            row.append(q(c, sorted(over.parts[c]).index(k)))
        diag.append(tuple(row))
    d = PsMap(A, Q, tuple(diag))
    logger.info("%s^X/U has sizes %s", A.name, [Q.size(c) for c in range(len(base.objects))])
    return UltrapowerBundle(A, U, UltrapowerPath.explicit, Q, d, ctx.image(d),
                            R, E, over, KU, q)


def _agreement_in_U(ctx, E, P, EU, R, c: int, k1: int, k2: int) -> bool:
    t1, t2 = E.maps[c][k1], E.maps[c][k2]
    stage = E.stages[c].apex
    agree = Subobject(stage, tuple(
        frozenset(
            j for j in range(stage.size(d))
            if t1.components[d][j] == t2.components[d][j] and R.is_total(d, t1.components[d][j])
        )
        for d in range(len(stage.carrier))
    ))
    return P.index_of(c, agree) in EU.parts[c]


def ultrapower_map(ctx, f: PsMap, src: UltrapowerBundle, tgt: UltrapowerBundle) -> PsMap:
    """
    f^X/U: A^X/U -> B^X/U, sending the class of θ to the class of f̃ ∘ θ.

    Raises:
        StructureError: The bundles were built with different filters or paths
    """
    if src.U != tgt.U or src.path != tgt.path:
        raise StructureError("ultrapower map between bundles of different filters")
    if f.source != src.A or f.target != tgt.A:
        raise ShapeError("map does not match the bundles")
    if src.path == UltrapowerPath.shortcut:
        return f
    ft = ctx.representer_map(f)
    E_src, E_tgt = src.exponential, tgt.exponential
    comps = []
    for c in range(len(ctx.base.objects)):
        row: Dict[int, int] = {}
        for k in sorted(src.over_U.parts[c]):
            theta = E_src.maps[c][k]
            image = E_tgt.index_of(c, theta.then(ft).components)
            row.setdefault(src.class_of(c, k), tgt.class_of(c, image))
        comps.append(tuple(row[i] for i in range(src.result.size(c))))
    return PsMap(src.result, tgt.result, tuple(comps))


def compare_paths(ctx, A: FinPresheaf, U: InternalFilter) -> Section:
    """
    Cross-check the explicit and shortcut ultrapowers of A at a principal U.

    The comparison sends the class of θ to θ evaluated at (x₀, id). It must
    be well defined, bijective and natural, and carry d_U to the identity.
    """
    if U.kind != FilterKind.principal:
        raise StructureError("paths can only be compared for a principal filter", U.describe())
    sec = Section(f"explicit and shortcut ultrapowers of {A.name} agree")
    ex = build_ultrapower(ctx, A, U, UltrapowerPath.explicit)
    sh = build_ultrapower(ctx, A, U, UltrapowerPath.shortcut)
    base = ctx.base
    R, E = ex.representer, ex.exponential
    comps = []
    well_defined = True
    for c in range(len(base.objects)):
        x0 = U.point.components[c][0]
        ident = base.identities[c]
        row: Dict[int, int] = {}
        for k in sorted(ex.over_U.parts[c]):
            value = R.value(c, E.apply(c, k, c, x0, ident))
            cls = ex.class_of(c, k)
            if value is None or row.setdefault(cls, value) != value:
                well_defined = False
        missing = [i for i in range(ex.result.size(c)) if i not in row]
        if missing:
            sec.add("every class is evaluated", False,
                    f"class {missing[0]} at {base.objects[c]} has no representative")
            return sec
        comps.append(tuple(row[i] for i in range(ex.result.size(c))))
    sec.add("every class is evaluated", True)
    sec.add("evaluation at the point is constant on classes", well_defined)
    phi = PsMap(ex.result, sh.result, tuple(comps))
    sec.add("comparison is bijective", phi.is_iso())
    nat = validate_map(phi)
    sec.add("comparison is natural", nat.ok, None if nat.ok else nat.violations[0].witness)
    sec.add("comparison carries d_U to d_U", ex.diag_map.then(phi).components
            == sh.diag_map.components)
    sec.note("sizes", [ex.result.size(c) for c in range(len(base.objects))])
    return sec


class UltrapowerFunctor:
    """
    (-)^X/U on standard objects and maps, with bundles cached per object.

    With ``path=auto`` one path is chosen for all objects: the shortcut for
    a principal filter, the explicit construction otherwise.
    """

    def __init__(self, ctx, U: InternalFilter, path: UltrapowerPath = UltrapowerPath.auto):
        self.ctx = ctx
        self.U = U
        path = UltrapowerPath(path)
        if path == UltrapowerPath.auto:
            principal = U.kind == FilterKind.principal
            path = UltrapowerPath.shortcut if principal else UltrapowerPath.explicit
        if path == UltrapowerPath.shortcut and U.kind != FilterKind.principal:
            raise StructureError("the shortcut ultrapower needs a principal filter", U.describe())
        self.path = path
        self._bundles: Dict[FinPresheaf, UltrapowerBundle] = {}

    def bundle(self, A: FinPresheaf) -> UltrapowerBundle:
        hit = self._bundles.get(A)
        if hit is None:
            hit = self._bundles.setdefault(A, build_ultrapower(self.ctx, A, self.U, self.path))
        return hit

    def obj(self, A: FinPresheaf) -> FinPresheaf:
        return self.bundle(A).result

    def lift(self, f: PsMap) -> PsMap:
        return ultrapower_map(self.ctx, f, self.bundle(f.source), self.bundle(f.target))

    def embed(self, S: Subobject) -> Subobject:
        """S^X/U as a subobject of A^X/U: the image of the lifted inclusion."""
        _, incl = S.as_presheaf(f"{S.ambient.name}|S")
        return self.ctx.image(self.lift(incl))


def _limit_checks(ctx, F: "UltrapowerFunctor", maps: Sequence[PsMap], sec: Section,
                  limit: int) -> None:
    """Equalizers of parallel pairs and pullbacks of cospans among ``maps``."""
    done = 0
    for k, f in enumerate(maps):
        for g in maps[k + 1:]:
            if done >= limit:
                return
            if f.target != g.target:
                continue
            Ff, Fg = F.lift(f), F.lift(g)
            if f.source == g.source:
                e = F.lift(ctx.equalizer(f, g).legs[0])
                ok = e.is_mono() and Subobject.from_mono(e) == Subobject.from_mono(
                    ctx.equalizer(Ff, Fg).legs[0])
                sec.add(f"equalizer of {f.source.name} => {f.target.name}", ok)
                done += 1
            pb = ctx.pullback(f, g)
            prod = ctx.product(Ff.source, Fg.source)
            p1, p2 = prod.legs
            cmp = ctx.tuple_map(prod, [F.lift(pb.legs[0]), F.lift(pb.legs[1])])
            square = Subobject(prod.apex, tuple(
                frozenset(i for i in range(prod.apex.size(c)) if Ff(c, p1(c, i)) == Fg(c, p2(c, i)))
                for c in range(len(ctx.base.objects))
            ))
            ok = cmp.is_mono() and Subobject.from_mono(cmp) == square
            sec.add(f"pullback of {f.source.name} -> {f.target.name} <- {g.source.name}", ok)
            done += 1


def check_heyting_functor(ctx, F: UltrapowerFunctor, objects: Sequence[FinPresheaf],
                          maps: Iterable[PsMap] = (), epi: Optional[PsMap] = None,
                          limit: int = 16) -> Section:
    """
    Spot-check that (-)^X/U is a Heyting functor on the test family.

    Finite limits are checked on the terminal object, binary products of
    the family, and up to ``limit`` equalizers and pullbacks built from
    ``maps``.

    Over a base that is not a groupoid the internal axiom of choice is not
    guaranteed; that is reported as a failed precondition and nothing else
    is checked.
    """
    sec = Section("ultrapower is a Heyting functor")
    if not ctx.base.is_groupoid():
        sec.add("base is a groupoid", False, f"{ctx.base.name} has non-invertible morphisms")
        return sec
    one = ctx.terminal()
    sec.add("terminal", all(len(ls) == 1 for ls in F.obj(one).carrier))
    objects = list(objects)
    for i, A in enumerate(objects):
        for B in objects[i:]:
            cone = ctx.product(A, B)
            lifted = ctx.product(F.obj(A), F.obj(B))
            cmp = ctx.tuple_map(lifted, [F.lift(leg) for leg in cone.legs])
            sec.add(f"product {A.name} × {B.name}", cmp.is_iso())
    maps = list(maps)
    _limit_checks(ctx, F, maps, sec, limit)
    for A in objects:
        ops, up = HeytingOps(A), HeytingOps(F.obj(A))
        subs = ctx.subobjects(A)
        sec.add(f"top over {A.name}", F.embed(ops.top()) == up.top())
        sec.add(f"bottom over {A.name}", F.embed(ops.bottom()) == up.bottom())
        for op in ("meet", "join", "implies"):
            bad = next((
                (S, T) for S in subs for T in subs
                if F.embed(getattr(ops, op)(S, T)) != getattr(up, op)(F.embed(S), F.embed(T))
            ), None)
            sec.add(f"{op} over {A.name}", bad is None,
                    None if bad is None else
                    f"{render_parts(bad[0].labels())} / {render_parts(bad[1].labels())}")
        bad = next((S for S in subs
                    if up.meet(F.embed(S), F.embed(ops.negate(S))) != up.bottom()
                    or up.join(F.embed(S), F.embed(ops.negate(S))) != up.top()), None)
        sec.add(f"complements over {A.name}", bad is None,
                None if bad is None else render_parts(bad.labels()))
    for f in maps:
        bad = next((S for S in ctx.subobjects(f.source)
                    if F.embed(exists_along(ctx, f, S)) != exists_along(ctx, F.lift(f), F.embed(S))),
                   None)
        sec.add(f"images along {f.source.name}->{f.target.name}", bad is None,
                None if bad is None else render_parts(bad.labels()))
    if epi is not None:
        if not epi.is_epi():
            raise ShapeError("the supplied map is not an epimorphism")
        lifted = ctx.exponential_map(F.U.X, ctx.representer_map(epi))
        sec.add(f"~(-)^X preserves the epi {epi.source.name}->{epi.target.name}", lifted.is_epi())
    return sec


def check_diagonal(ctx, F: UltrapowerFunctor, objects: Sequence[FinPresheaf],
                   flags_ultra: Optional[bool] = None) -> Section:
    """d_U is monic on every object; d_U(Ω) is an iso exactly when U is ultra."""
    sec = Section("diagonal d_U")
    for A in objects:
        sec.add(f"monic on {A.name}", F.bundle(A).diag_map.is_mono())
    Om = ctx.omega().obj
    iso = F.bundle(Om).diag_map.is_iso()
    sec.note("d_U(Ω) is an isomorphism", iso)
    if flags_ultra is not None:
        sec.add("d_U(Ω) is an isomorphism iff U is ultra", iso == flags_ultra)
    return sec
