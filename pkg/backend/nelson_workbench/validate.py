"""Exhaustive law checks for categories, presheaves, maps and subobjects."""
from dataclasses import dataclass, field
from typing import List, Union

import numpy as np

from nelson_workbench.category import UNDEFINED, FinCategory
from nelson_workbench.presheaf import FinPresheaf, PsMap, Subobject
from nelson_workbench.report import Section


@dataclass(frozen=True)
class Violation:
    """A broken law and the concrete data that breaks it."""
    law: str
    witness: str


@dataclass
class ValidationReport:
    item: str
    violations: List[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, law: str, witness: str) -> None:
        self.violations.append(Violation(law, witness))

    def to_section(self) -> Section:
        sec = Section(f"validate {self.item}")
        if self.ok:
            sec.add("all laws hold", True)
        for v in self.violations:
            sec.add(v.law, False, v.witness)
        return sec


def validate(ctx, item: Union[FinCategory, FinPresheaf, PsMap, Subobject]) -> ValidationReport:
    """
    Check every law the item is subject to.

    Violations are report content; an empty report means the item is valid.

    Args:
        ctx: ToposCtx (only its base is used for presheaves and maps)
        item: A category, presheaf, map or subobject

    Returns:
        ValidationReport listing each violation with a witness
    """
    if isinstance(item, FinCategory):
        return validate_category(item)
    if isinstance(item, FinPresheaf):
        return validate_presheaf(item)
    if isinstance(item, PsMap):
        return validate_map(item)
    if isinstance(item, Subobject):
        return validate_subobject(item)
    raise TypeError(f"cannot validate {type(item).__name__}")


def validate_category(C: FinCategory) -> ValidationReport:
    rep = ValidationReport(f"category {C.name or '?'}")
    T = C.table
    n = len(C.morphisms)
    m = C.morphisms
    dom = np.asarray(C.dom, dtype=np.int64)
    cod = np.asarray(C.cod, dtype=np.int64)
    if T.shape != (n, n):
        rep.add("typing", f"composition table has shape {T.shape}, expected {(n, n)}")
        return rep

    composable = dom[:, None] == cod[None, :]
    defined = T != UNDEFINED
    for u, v in zip(*np.nonzero(composable & ~defined)):
        rep.add("typing", f"({m[u]}, {m[v]}) is composable but has no composite")
    for u, v in zip(*np.nonzero(~composable & defined)):
        rep.add("typing", f"({m[u]}, {m[v]}) is not composable but has composite {m[T[u, v]]}")
    ok = composable & defined
    for u, v in zip(*np.nonzero(ok)):
        w = T[u, v]
        if dom[w] != dom[v] or cod[w] != cod[u]:
            rep.add("typing", f"({m[u]}, {m[v]}) composes to {m[w]} with the wrong domain or codomain")

    for c, i in enumerate(C.identities):
        if C.dom[i] != c or C.cod[i] != c:
            rep.add("identity", f"{m[i]} is not an endomorphism of {C.objects[c]}")
    for u in range(n):
        left, right = C.identities[C.cod[u]], C.identities[C.dom[u]]
        if T[left, u] != u or T[u, right] != u:
            rep.add("identity", f"identity law fails at {m[u]}")

    # u ∘ (v ∘ w) == (u ∘ v) ∘ w on composable triples with well-typed composites
    safe = np.where(ok, T, 0)
    triple = ok[:, :, None] & ok[None, :, :]
    uv = safe[:, :, None]
    vw = safe[None, :, :]
    idx_u = np.arange(n)[:, None, None]
    idx_w = np.arange(n)[None, None, :]
    triple &= ok[np.broadcast_to(uv, (n, n, n)), np.broadcast_to(idx_w, (n, n, n))]
    triple &= ok[np.broadcast_to(idx_u, (n, n, n)), np.broadcast_to(vw, (n, n, n))]
    lhs = safe[uv, idx_w]
    rhs = safe[idx_u, vw]
    for u, v, w in zip(*np.nonzero(triple & (lhs != rhs))):
        rep.add("associativity", f"({m[u]}, {m[v]}, {m[w]})")
    return rep


def validate_presheaf(A: FinPresheaf) -> ValidationReport:
    rep = ValidationReport(f"presheaf {A.name or '?'}")
    C = A.base
    m = C.morphisms
    if len(A.carrier) != len(C.objects) or len(A.action) != len(m):
        rep.add("action-shape", "carrier or action does not match the base")
        return rep
    for u in range(len(m)):
        row = A.action[u]
        size = A.size(C.dom[u])
        if len(row) != A.size(C.cod[u]) or any(not 0 <= j < size for j in row):
            rep.add("action-shape", f"action of {m[u]} is not a function "
                                    f"{C.objects[C.cod[u]]} -> {C.objects[C.dom[u]]}")
    if not rep.ok:
        return rep
    for c, ident in enumerate(C.identities):
        for i in range(A.size(c)):
            if A.action[ident][i] != i:
                rep.add("functoriality", f"{m[ident]} moves {A.label(c, i)!r}")
                break
    for u in range(len(m)):
        for v in C.into[C.dom[u]]:
            w = C.table[u, v]
            if w == UNDEFINED:
                continue
            for i in range(A.size(C.cod[u])):
                if A.action[w][i] != A.action[v][A.action[u][i]]:
                    rep.add("functoriality",
                            f"({m[u]}, {m[v]}) on {A.label(C.cod[u], i)!r}")
                    break
    return rep


def validate_map(f: PsMap) -> ValidationReport:
    rep = ValidationReport(f"map {f.source.name or '?'} -> {f.target.name or '?'}")
    C = f.source.base
    if f.target.base is not C:
        rep.add("naturality", "source and target live over different bases")
        return rep
    for c in range(len(C.objects)):
        comp = f.components[c] if c < len(f.components) else ()
        if len(comp) != f.source.size(c) or any(not 0 <= j < f.target.size(c) for j in comp):
            rep.add("naturality", f"component at {C.objects[c]} is not a function")
    if not rep.ok:
        return rep
    for u, name in enumerate(C.morphisms):
        c, d = C.dom[u], C.cod[u]
        for i in range(f.source.size(d)):
            if f(c, f.source.act(u, i)) != f.target.act(u, f(d, i)):
                rep.add("naturality", f"square for {name} fails at {f.source.label(d, i)!r}")
                break
    return rep


def validate_subobject(S: Subobject) -> ValidationReport:
    rep = ValidationReport(f"subobject of {S.ambient.name or '?'}")
    hole = S.closure_witness()
    if hole is not None:
        rep.add("closure", hole)
    return rep
