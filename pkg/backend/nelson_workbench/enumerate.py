"""Exhaustive enumeration of subobjects and natural maps by constraint propagation."""
import logging
from typing import Dict, List, Optional, Tuple

from nelson_workbench.config import Budget
from nelson_workbench.presheaf import Element, FinPresheaf, PsMap, Subobject

logger = logging.getLogger(__name__)


def _down_sets(A: FinPresheaf) -> Dict[Element, Tuple[Element, ...]]:
    return {
        (c, i): tuple(sorted({e for _, e in A.restrictions(c, i)}))
        for c, i in A.elements()
    }


def enumerate_subobjects(A: FinPresheaf, budget: Optional[Budget] = None) -> List[Subobject]:
    """
    List every subfunctor of A in canonical order.

    Elements are decided in canonical order. Taking an element forces its
    whole down-set in; leaving it out forces every element above it out.

    Args:
        A: Ambient presheaf
        budget: Bound on visited search nodes

    Returns:
        Subobjects sorted by ``Subobject.key``
    """
    budget = budget or Budget()
    order = list(A.elements())
    down = _down_sets(A)
    up: Dict[Element, List[Element]] = {e: [] for e in order}
    for e, ds in down.items():
        for d in ds:
            up[d].append(e)

    found: List[Subobject] = []
    visited = 0

    def assign(state: Dict[Element, bool], forced, value: bool) -> Optional[Dict[Element, bool]]:
        new = dict(state)
        for e in forced:
            prev = new.get(e)
            if prev is None:
                new[e] = value
            elif prev != value:
                return None
        return new

    def search(k: int, state: Dict[Element, bool]) -> None:
        nonlocal visited
        visited += 1
        budget.check_enumeration(visited, f"subobjects of {A.name or 'presheaf'}")
        while k < len(order) and order[k] in state:
            k += 1
        if k == len(order):
            parts = [set() for _ in A.carrier]
            for (c, i), inside in state.items():
                if inside:
                    parts[c].add(i)
            found.append(Subobject(A, tuple(frozenset(p) for p in parts)))
            return
        e = order[k]
        for value, forced in ((False, up[e]), (True, down[e])):
            nxt = assign(state, forced, value)
            if nxt is not None:
                search(k + 1, nxt)

    search(0, {})
    found.sort(key=Subobject.key)
    logger.debug("%d subobjects of %r (%d nodes)", len(found), A, visited)
    return found


def enumerate_maps(
    source: FinPresheaf,
    target: FinPresheaf,
    budget: Optional[Budget] = None,
) -> List[PsMap]:
    """
    List every natural map source -> target, sorted by components.

    Choosing a value for one element fixes the values on its whole
    down-set, so only consistent partial assignments are extended.
    """
    budget = budget or Budget()
    order = list(source.elements())
    base = source.base
    found: List[PsMap] = []
    visited = 0

    def propagate(state: Dict[Element, int], c: int, i: int, j: int) -> Optional[Dict[Element, int]]:
        new = dict(state)
        for u in base.into[c]:
            d = base.dom[u]
            e = (d, source.action[u][i])
            v = target.action[u][j]
            prev = new.get(e)
            if prev is None:
                new[e] = v
            elif prev != v:
                return None
        return new

    def search(k: int, state: Dict[Element, int]) -> None:
        nonlocal visited
        visited += 1
        budget.check_enumeration(
            visited, f"maps {source.name or 'presheaf'} -> {target.name or 'presheaf'}"
        )
        while k < len(order) and order[k] in state:
            k += 1
        if k == len(order):
            found.append(PsMap(source, target, tuple(
                tuple(state[(c, i)] for i in range(source.size(c)))
                for c in range(len(source.carrier))
            )))
            return
        c, i = order[k]
        for j in range(target.size(c)):
            nxt = propagate(state, c, i, j)
            if nxt is not None:
                search(k + 1, nxt)

    search(0, {})
    found.sort(key=lambda m: m.components)
    logger.debug("%d maps %r -> %r (%d nodes)", len(found), source, target, visited)
    return found
