"""Check suites over a loaded spec, shared by the command line and the HTTP app."""
import logging
from typing import Callable, List, Optional, Sequence

from nelson_workbench.axioms import (
    IdealisationInstance,
    adequate_ultrapower,
    check_idealisation,
    check_standardisation,
    realize_point,
    soundness_suite,
    transfer_section,
)
from nelson_workbench.config import Suite
from nelson_workbench.doctrine import (
    Doctrine,
    SubDoctrine,
    check_adjunctions,
    check_beck_chevalley,
    check_de_morgan,
    check_frobenius,
    check_generic_predicate,
    check_heyting_laws,
    check_quantifier_formulas,
    check_substitution_heyting,
    pullback_squares,
)
from nelson_workbench.errors import BudgetExceeded, SpecError, StructureError
from nelson_workbench.nelson import (
    NelsonStructure,
    StandardDoctrine,
    build_nelson,
    check_definition,
    corrupt_sigma,
    standard_maps,
)
from nelson_workbench.presheaf import FinPresheaf, PsMap
from nelson_workbench.report import Report, Section, render_label
from nelson_workbench.specfile import LoadedSpec, default_family
from nelson_workbench.ultra import check_forms_agree, enumerate_internal_ultrafilters
from nelson_workbench.validate import validate, validate_map

logger = logging.getLogger(__name__)


def run_validate(spec: LoadedSpec) -> Report:
    """Every declared item against the laws it must satisfy."""
    rep = Report(f"{spec.name}: validate")
    ctx = spec.ctx
    base = rep.add(validate(ctx, spec.base).to_section())
    if not base.passed:
        return rep
    for name, A in spec.presheaves.items():
        rep.add(validate(ctx, A).to_section()).name = f"validate presheaf {name}"
    for name, f in spec.maps.items():
        rep.add(validate(ctx, f).to_section()).name = f"validate map {name}"
    for name, S in spec.subobjects.items():
        rep.add(validate(ctx, S).to_section()).name = f"validate subobject {name}"
    for name, U in spec.filters.items():
        if U.point is not None:
            rep.add(validate_map(U.point).to_section()).name = f"validate point of {name}"
    return rep


def run_enumerate(spec: LoadedSpec, object_name: Optional[str] = None) -> Report:
    """The internal ultrafilters on one object, with their flags."""
    name = object_name or (spec.nelson.X if spec.nelson is not None else None)
    if name is None:
        raise SpecError("enumerate needs an object (--object) or a nelson block")
    X = spec.presheaf(name)
    found = enumerate_internal_ultrafilters(spec.ctx, X)
    rep = Report(f"{spec.name}: ultrafilters on {name}")
    sec = rep.add(Section(f"internal ultrafilters on {name}"))
    sec.note("count", len(found))
    for n, U in enumerate(found, 1):
        flags = U.flags
        sec.note(f"ultrafilter {n}", f"{U.describe()} (filter={render_label(flags.is_filter)}, "
                                     f"proper={render_label(flags.is_proper)}, "
                                     f"ultra={render_label(flags.is_ultra)})")
        if U.point is not None:
            rep.add(check_forms_agree(spec.ctx, U))
    return rep


def build_structure(spec: LoadedSpec, family: Sequence[FinPresheaf],
                    maps: Optional[Sequence[PsMap]] = None) -> NelsonStructure:
    """
    The structure declared by the nelson block, checked against the
    definition on the family, then corrupted on request.

    Raises:
        StructureError: The uncorrupted structure violates a clause
    """
    req = spec.nelson
    if req is None:
        raise SpecError("spec declares no nelson structure")
    ctx = spec.ctx
    N = build_nelson(ctx, spec.presheaf(req.X), spec.filter(req.ultrafilter), family=family,
                     maps=maps, path=req.path, allow_proper=req.allow_proper)
    if req.corrupt_sigma is not None:
        N = corrupt_sigma(N, spec.presheaf(req.corrupt_sigma))
    return N


def _guarded(rep: Report, what: str, run: Callable[[], None]) -> None:
    """Run one suite item; an over-budget item is recorded as skipped."""
    try:
        run()
    except BudgetExceeded as e:
        logger.warning("skipping %s: %s", what, e)
        rep.add(Section(what)).skip("all checks", str(e))


def doctrine_sections(rep: Report, ctx, D: Doctrine, objects: Sequence[FinPresheaf],
                      maps: Sequence[PsMap]) -> None:
    _guarded(rep, f"quantifier adjunctions ({D.name})",
             lambda: rep.add(check_adjunctions(ctx, D, maps)))
    _guarded(rep, f"Frobenius reciprocity ({D.name})",
             lambda: rep.add(check_frobenius(ctx, D, maps)))
    _guarded(rep, f"substitution is a Heyting morphism ({D.name})",
             lambda: rep.add(check_substitution_heyting(ctx, D, maps)))
    for sq in pullback_squares(ctx, maps, limit=16):
        _guarded(rep, f"Beck-Chevalley ({D.name})",
                 lambda sq=sq: rep.add(check_beck_chevalley(ctx, D, sq)))
    _guarded(rep, f"generic predicate ({D.name})",
             lambda: rep.add(check_generic_predicate(ctx, D, objects)))


def run_doctrine(rep: Report, ctx, N: Optional[NelsonStructure],
                 objects: Sequence[FinPresheaf], maps: Sequence[PsMap]) -> None:
    for A in objects:
        _guarded(rep, f"Heyting laws on Sub({A.name})", lambda A=A: rep.add(check_heyting_laws(ctx, A)))
    doctrine_sections(rep, ctx, SubDoctrine(ctx), objects, maps)
    _guarded(rep, "quantifiers match adjoint search",
             lambda: rep.add(check_quantifier_formulas(ctx, maps)))
    if ctx.base.is_groupoid():
        rep.add(check_de_morgan(ctx, maps))
    if N is not None:
        doctrine_sections(rep, ctx, StandardDoctrine(N), objects, maps)


def run_transfer(rep: Report, N: NelsonStructure, maps: Sequence[PsMap]) -> None:
    for f in maps:
        _guarded(rep, f"transfer along {f.source.name}->{f.target.name}",
                 lambda f=f: rep.add(transfer_section(N, f)))


def run_standardisation(rep: Report, N: NelsonStructure, objects: Sequence[FinPresheaf]) -> None:
    for A in objects:
        _guarded(rep, f"standardisation over {A.name}",
                 lambda A=A: rep.sections.extend(check_standardisation(N, A).sections))


def run_idealisation(rep: Report, spec: LoadedSpec, N: Optional[NelsonStructure]) -> None:
    ctx = spec.ctx
    if spec.adequate is not None:
        req = spec.adequate
        B = spec.presheaf(req.B)
        family = [spec.presheaf(n) for n in req.object_family] or [B]
        _, _, Na = adequate_ultrapower(ctx, B, family=family)
        sec = rep.add(Section(f"adequate ultrapower for {req.B}"))
        sec.note("index size", Na.X.size())
        sec.note("point", Na.U.describe())
        for V in enumerate_internal_ultrafilters(ctx, B):
            try:
                xi = realize_point(Na, V)
            except StructureError as e:
                sec.add(f"realizes {V.describe()}", False, str(e))
                continue
            sec.add(f"realizes {V.describe()}", True)
            sec.note(f"ξ for {V.describe()}",
                     [render_label(xi.target.label(c, comp[0])) for c, comp in enumerate(xi.components)])
        for a in req.A:
            A = spec.presheaf(a)
            rel = ctx.product(A, B).apex
            sec = rep.add(Section(f"idealisation for {a} × {req.B}"))
            subs = ctx.subobjects(rel)
            sec.note("relations", len(subs))
            bad = None
            for R in subs:
                part = check_idealisation(Na, IdealisationInstance(A, B, R))
                if not part.passed:
                    bad = part.title
                    break
            sec.add("hypothesis implies conclusion for every relation", bad is None, bad)
    target = N
    for req in spec.idealisation:
        if target is None:
            raise SpecError("idealisation instances need a nelson block")
        inst = IdealisationInstance(spec.presheaf(req.A), spec.presheaf(req.B), spec.subobject(req.R))
        rep.sections.extend(check_idealisation(target, inst).sections)


def run_check(spec: LoadedSpec, suite: Suite = Suite.all,
              family: Optional[Sequence[str]] = None) -> Report:
    """
    Run one suite (or all of them) against the spec's structure.

    Args:
        spec: Loaded spec
        suite: Which checks to run
        family: Presheaf names overriding the object family

    Returns:
        Report with one section per check group
    """
    suite = Suite(suite)
    ctx = spec.ctx
    objects = default_family(spec, family)
    maps = standard_maps(ctx, objects)
    rep = Report(f"{spec.name}: {suite.value}")
    N = build_structure(spec, objects, maps) if spec.nelson is not None else None
    wants = [suite] if suite != Suite.all else [s for s in Suite if s != Suite.all]
    needs_structure = {Suite.transfer, Suite.standardisation, Suite.soundness}
    if N is None and needs_structure & set(wants) and not (suite == Suite.all and spec.adequate):
        raise SpecError(f"suite {suite.value} needs a nelson block")
    logger.info("running %s on %s over %d objects and %d maps",
                suite.value, spec.name, len(objects), len(maps))
    if N is not None and Suite.soundness not in wants:
        # soundness opens with the same section
        rep.add(check_definition(N, objects, maps, heyting=not N.allow_proper))
    for s in wants:
        if s == Suite.doctrine:
            run_doctrine(rep, ctx, N, objects, maps)
        elif s == Suite.idealisation:
            run_idealisation(rep, spec, N)
        elif N is None:
            continue
        elif s == Suite.transfer:
            run_transfer(rep, N, maps)
        elif s == Suite.standardisation:
            run_standardisation(rep, N, objects)
        elif s == Suite.soundness:
            _guarded(rep, "soundness", lambda: rep.sections.extend(soundness_suite(N, objects, maps).sections))
    return rep


def suite_names() -> List[str]:
    return [s.value for s in Suite]
