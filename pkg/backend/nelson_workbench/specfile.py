"""
Topos specification files.

A spec file is a JSON object::

    {
      "builtin": "cyclic:2",                       or "base": {...} or "group": {...}
      "presheaves": {
        "A": {"carrier": {"*": ["a", "b"]}, "action": {"g1": {"a": "b", "b": "a"}}},
        "one": {"builtin": "terminal"},
        "R": {"builtin": "regular"},
        "X": {"coproduct": ["R", "one"]},
        "AA": {"product": ["A", "A"]}
      },
      "maps": {"f": {"source": "A", "target": "one", "components": {"*": {"a": "*", "b": "*"}}}},
      "subobjects": {"S": {"of": "A", "parts": {"*": ["a"]}}},
      "ultrafilters": {"U": {"on": "X", "principal_at": {"*": [1, "*"]}}},
      "nelson": {"X": "X", "ultrafilter": "U", "object_family": ["A", "one"]},
      "adequate": {"B": "A", "A": ["A"]},
      "idealisation": [{"A": "A", "B": "A", "R": "Rel"}]
    }

Names must be defined before they are referenced. JSON lists inside
element labels are read as tuples, so product and coproduct elements are
written as lists. Action and component tables may be given as objects or
as lists of [from, to] pairs when labels are not strings.

A single ultrafilter may instead be given at the top level as
``"ultrafilter": {"on": ..., "generated_by": [...]}``, and the nelson block
may carry its ultrafilter inline.
"""
import json
import logging
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Dict, Hashable, List, Mapping, Optional, Sequence, Tuple

from nelson_workbench.category import FinCategory, builtin_category, group_category
from nelson_workbench.config import Budget
from nelson_workbench.errors import SpecError
from nelson_workbench.presheaf import FinPresheaf, PsMap, Subobject
from nelson_workbench.topos import ToposCtx
from nelson_workbench.ultra import (
    InternalFilter,
    generated_filter,
    principal_ultrafilter,
)
from nelson_workbench.ultrapower import UltrapowerPath
from nelson_workbench.validate import validate_map

logger = logging.getLogger(__name__)

TOP_KEYS = {"base", "group", "builtin", "presheaves", "maps", "subobjects", "ultrafilters",
            "ultrafilter", "nelson", "adequate", "idealisation", "name"}


@dataclass(frozen=True)
class NelsonRequest:
    X: str
    ultrafilter: str
    object_family: Tuple[str, ...] = ()
    path: UltrapowerPath = UltrapowerPath.auto
    allow_proper: bool = False
    corrupt_sigma: Optional[str] = None


@dataclass(frozen=True)
class AdequateRequest:
    B: str
    A: Tuple[str, ...] = ()
    object_family: Tuple[str, ...] = ()


@dataclass(frozen=True)
class IdealisationRequest:
    A: str
    B: str
    R: str


@dataclass
class LoadedSpec:
    """Everything a spec file declares, resolved against one topos context."""
    name: str
    ctx: ToposCtx
    presheaves: Dict[str, FinPresheaf] = field(default_factory=dict)
    maps: Dict[str, PsMap] = field(default_factory=dict)
    subobjects: Dict[str, Subobject] = field(default_factory=dict)
    filters: Dict[str, InternalFilter] = field(default_factory=dict)
    nelson: Optional[NelsonRequest] = None
    adequate: Optional[AdequateRequest] = None
    idealisation: List[IdealisationRequest] = field(default_factory=list)

    @property
    def base(self) -> FinCategory:
        return self.ctx.base

    def presheaf(self, name: str) -> FinPresheaf:
        try:
            return self.presheaves[name]
        except KeyError:
            raise SpecError(f"unknown presheaf {name!r}")

    def subobject(self, name: str) -> Subobject:
        try:
            return self.subobjects[name]
        except KeyError:
            raise SpecError(f"unknown subobject {name!r}")

    def filter(self, name: str) -> InternalFilter:
        try:
            return self.filters[name]
        except KeyError:
            raise SpecError(f"unknown ultrafilter {name!r}")


def _label(value: Any) -> Hashable:
    if isinstance(value, list):
        return tuple(_label(v) for v in value)
    if isinstance(value, dict):
        raise SpecError("element labels cannot be objects")
    return value


def _table(value: Any, what: str) -> Dict[Hashable, Hashable]:
    if isinstance(value, dict):
        return {_label(k): _label(v) for k, v in value.items()}
    if isinstance(value, list):
        try:
            return {_label(k): _label(v) for k, v in value}
        except (TypeError, ValueError):
            raise SpecError(f"{what}: expected a list of [from, to] pairs")
    raise SpecError(f"{what}: expected an object or a list of pairs")


def _keys(block: Mapping[str, Any], allowed: Sequence[str], what: str) -> None:
    if not isinstance(block, dict):
        raise SpecError(f"{what} must be an object")
    unknown = sorted(set(block) - set(allowed))
    if unknown:
        raise SpecError(f"{what}: unknown keys {', '.join(unknown)}")


def _names(value: Any, what: str) -> Tuple[str, ...]:
    if not isinstance(value, list) or not all(isinstance(v, str) for v in value):
        raise SpecError(f"{what} must be a list of names")
    return tuple(value)


def _base(data: Mapping[str, Any]) -> FinCategory:
    given = [k for k in ("base", "group", "builtin") if k in data]
    if len(given) != 1:
        raise SpecError("give exactly one of base, group or builtin")
    kind = given[0]
    if kind == "builtin":
        if not isinstance(data["builtin"], str):
            raise SpecError("builtin must be a string")
        return builtin_category(data["builtin"])
    if kind == "group":
        g = data["group"]
        _keys(g, ("elements", "table", "name"), "group")
        if "elements" not in g or "table" not in g:
            raise SpecError("group needs elements and table")
        return group_category(g["elements"], g["table"], name=g.get("name", "BG"))
    b = data["base"]
    _keys(b, ("objects", "morphisms", "compose", "identities", "name"), "base")
    try:
        morphisms = [(m["name"], m["dom"], m["cod"]) for m in b["morphisms"]]
        compose = [tuple(t) for t in b.get("compose", [])]
        return FinCategory.from_tables(b["objects"], morphisms, compose, b["identities"],
                                       name=b.get("name", ""))
    except (KeyError, TypeError, ValueError) as e:
        raise SpecError(f"malformed base: {e}")


def _presheaf(spec: LoadedSpec, name: str, entry: Mapping[str, Any]) -> FinPresheaf:
    ctx = spec.ctx
    _keys(entry, ("carrier", "action", "builtin", "object", "coproduct", "product", "power"),
          f"presheaf {name}")
    if "carrier" in entry:
        carrier = {o: [_label(l) for l in ls] for o, ls in entry["carrier"].items()}
        action = {m: _table(t, f"action of {m} on {name}")
                  for m, t in entry.get("action", {}).items()}
        return FinPresheaf.from_labels(spec.base, carrier, action, name)
    if "builtin" in entry:
        kind = entry["builtin"]
        if kind == "terminal":
            P = ctx.terminal()
        elif kind == "initial":
            P = ctx.initial()
        elif kind == "omega":
            P = ctx.omega().obj
        elif kind == "regular":
            if len(spec.base.objects) != 1:
                raise SpecError(f"presheaf {name}: regular needs a one-object base")
            P = ctx.representable(0)
        elif kind == "representable":
            P = ctx.representable(spec.base.obj_index(entry.get("object", "")))
        else:
            raise SpecError(f"presheaf {name}: unknown builtin {kind!r}")
    elif "coproduct" in entry:
        parts = _names(entry["coproduct"], f"coproduct {name}")
        if len(parts) != 2:
            raise SpecError(f"presheaf {name}: coproduct takes two presheaves")
        P = ctx.coproduct(*(spec.presheaf(p) for p in parts)).apex
    elif "product" in entry:
        P = ctx.product_of([spec.presheaf(p) for p in _names(entry["product"], f"product {name}")]).apex
    elif "power" in entry:
        P = ctx.power_object(spec.presheaf(entry["power"])).obj
    else:
        raise SpecError(f"presheaf {name}: nothing to build")
    return replace(P, name=name)


def _point_table(spec: LoadedSpec, name: str, point: Any) -> Dict[str, Any]:
    """A global element as {object: label}; a bare label is accepted over a one-object base."""
    if isinstance(point, dict):
        return point
    if len(spec.base.objects) == 1:
        return {spec.base.objects[0]: point}
    raise SpecError(f"ultrafilter {name}: principal_at needs {{object: element}}")


def _filter(spec: LoadedSpec, name: str, entry: Mapping[str, Any]) -> InternalFilter:
    """
    One ultrafilter entry: ``{"on": X, "principal_at": point}`` or
    ``{"on": X, "generated_by": [subobject names]}``. The shorter
    ``principal`` and ``generated`` keys are read as aliases.
    """
    _keys(entry, ("on", "principal", "principal_at", "generated", "generated_by"),
          f"ultrafilter {name}")
    X = spec.presheaf(entry.get("on", ""))
    principal = [k for k in ("principal_at", "principal") if k in entry]
    generated = [k for k in ("generated_by", "generated") if k in entry]
    if len(principal) + len(generated) != 1:
        raise SpecError(f"ultrafilter {name}: give exactly one of principal_at or generated_by")
    if principal:
        point = _point_table(spec, name, entry[principal[0]])
        one = spec.ctx.terminal()
        comps = {o: {"*": _label(v)} for o, v in point.items()}
        x = PsMap.from_labels(one, X, comps)
        if not validate_map(x).ok:
            raise SpecError(f"ultrafilter {name}: the point is not a global element of {X.name}")
        return principal_ultrafilter(spec.ctx, x, verify=False, label=name)
    gens = [spec.subobject(s) for s in _names(entry[generated[0]], f"ultrafilter {name}")]
    return generated_filter(spec.ctx, X, gens, label=name)


def loads(text: str, budget: Optional[Budget] = None, name: str = "spec") -> LoadedSpec:
    """
    Parse spec text.

    Raises:
        SpecError: Malformed JSON, unknown keys or names, ill-typed data
    """
    try:
        data = json.loads(text)
    except json.JSONDecodeError as e:
        raise SpecError(f"spec is not valid JSON: {e}")
    if not isinstance(data, dict):
        raise SpecError("spec must be a JSON object")
    _keys(data, TOP_KEYS, "spec")
    base = _base(data)
    spec = LoadedSpec(data.get("name", name), ToposCtx(base, budget or Budget.from_env()))
    try:
        _populate(spec, data)
    except (AttributeError, TypeError) as e:
        raise SpecError(f"malformed spec: {e}")
    logger.info("loaded spec %s over %s: %d presheaves, %d maps", spec.name, base.name,
                len(spec.presheaves), len(spec.maps))
    return spec


def _filter_ref(spec: LoadedSpec, ref: Any) -> str:
    """
    Resolve the nelson block's ultrafilter: a declared name, an inline
    entry, or the only declared ultrafilter when left out.
    """
    if isinstance(ref, dict):
        spec.filters["nelson.ultrafilter"] = _filter(spec, "nelson.ultrafilter", ref)
        return "nelson.ultrafilter"
    if ref is None:
        if len(spec.filters) != 1:
            raise SpecError("nelson: name the ultrafilter to use")
        return next(iter(spec.filters))
    if not isinstance(ref, str):
        raise SpecError("nelson.ultrafilter must be a name or an ultrafilter entry")
    return ref


def _populate(spec: LoadedSpec, data: Mapping[str, Any]) -> None:
    for pname, entry in data.get("presheaves", {}).items():
        spec.presheaves[pname] = _presheaf(spec, pname, entry)
    for mname, entry in data.get("maps", {}).items():
        _keys(entry, ("source", "target", "components"), f"map {mname}")
        comps = {o: _table(t, f"map {mname} at {o}") for o, t in entry.get("components", {}).items()}
        spec.maps[mname] = PsMap.from_labels(spec.presheaf(entry.get("source", "")),
                                             spec.presheaf(entry.get("target", "")), comps)
    for sname, entry in data.get("subobjects", {}).items():
        _keys(entry, ("of", "parts"), f"subobject {sname}")
        A = spec.presheaf(entry.get("of", ""))
        parts = {o: [_label(l) for l in ls] for o, ls in entry.get("parts", {}).items()}
        try:
            spec.subobjects[sname] = Subobject.from_labels(A, parts)
        except SpecError as e:
            raise SpecError(f"subobject {sname}: {e}")
    for fname, entry in data.get("ultrafilters", {}).items():
        spec.filters[fname] = _filter(spec, fname, entry)
    if "ultrafilter" in data:
        if "ultrafilter" in spec.filters:
            raise SpecError("ultrafilter is declared twice")
        spec.filters["ultrafilter"] = _filter(spec, "ultrafilter", data["ultrafilter"])

    if "nelson" in data:
        n = data["nelson"]
        _keys(n, ("X", "ultrafilter", "object_family", "path", "allow_proper", "corrupt_sigma"),
              "nelson")
        try:
            path = UltrapowerPath(n.get("path", "auto"))
        except ValueError:
            raise SpecError(f"nelson: unknown path {n.get('path')!r}")
        spec.nelson = NelsonRequest(
            X=n.get("X", ""), ultrafilter=_filter_ref(spec, n.get("ultrafilter")),
            object_family=_names(n.get("object_family", []), "nelson.object_family"),
            path=path, allow_proper=bool(n.get("allow_proper", False)),
            corrupt_sigma=n.get("corrupt_sigma"),
        )
        spec.presheaf(spec.nelson.X)
        spec.filter(spec.nelson.ultrafilter)
        for o in spec.nelson.object_family:
            spec.presheaf(o)
        if spec.nelson.corrupt_sigma is not None:
            spec.presheaf(spec.nelson.corrupt_sigma)
    if "adequate" in data:
        a = data["adequate"]
        _keys(a, ("B", "A", "object_family"), "adequate")
        spec.adequate = AdequateRequest(
            B=a.get("B", ""), A=_names(a.get("A", []), "adequate.A"),
            object_family=_names(a.get("object_family", []), "adequate.object_family"),
        )
        for o in (spec.adequate.B,) + spec.adequate.A + spec.adequate.object_family:
            spec.presheaf(o)
    for k, inst in enumerate(data.get("idealisation", [])):
        _keys(inst, ("A", "B", "R"), f"idealisation[{k}]")
        req = IdealisationRequest(inst.get("A", ""), inst.get("B", ""), inst.get("R", ""))
        spec.presheaf(req.A)
        spec.presheaf(req.B)
        spec.subobject(req.R)
        spec.idealisation.append(req)


def load_spec(path: Path, budget: Optional[Budget] = None) -> LoadedSpec:
    """Read and parse a spec file."""
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as e:
        raise SpecError(f"cannot read {path}: {e}")
    return loads(text, budget, name=path.stem)


def default_family(spec: LoadedSpec, override: Optional[Sequence[str]] = None) -> List[FinPresheaf]:
    """
    The objects suites run over.

    An override wins, then the family declared by the nelson block, then
    the one declared by the adequate block. Otherwise every named presheaf
    plus their pairwise products and power objects, one level deep and
    without repeats, in that order.

    Raises:
        BudgetExceeded: A product or power object is too large
    """
    if override:
        return [spec.presheaf(n) for n in override]
    if spec.nelson is not None and spec.nelson.object_family:
        return [spec.presheaf(n) for n in spec.nelson.object_family]
    if spec.adequate is not None and spec.adequate.object_family:
        return [spec.presheaf(n) for n in spec.adequate.object_family]
    ctx = spec.ctx
    named = list(spec.presheaves.items())
    family: List[FinPresheaf] = []
    for _, P in named:
        if P not in family:
            family.append(P)
    for k, (a, A) in enumerate(named):
        for b, B in named[k:]:
            AB = replace(ctx.product(A, B).apex, name=f"{a}×{b}")
            if AB not in family:
                family.append(AB)
    for a, A in named:
        PA = replace(ctx.power_object(A).obj, name=f"P({a})")
        if PA not in family:
            family.append(PA)
    return family
