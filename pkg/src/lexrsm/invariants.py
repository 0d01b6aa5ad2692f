"""Inductive invariants by candidate elimination.

Every location starts with a pool of candidate atoms (program guards,
loop annotations and per-location annotations).  Atoms that some
transition fails to preserve are removed until the remaining
conjunctions are inductive.  The result is the strongest inductive
invariant expressible with the pool; the initial location is
unconstrained.
"""
from __future__ import annotations

from typing import Mapping, Optional

from .linear import LinConstraint, LinExpr, Polyhedron
from .lp import find_point
from .pcfg import FRESH, PCFG, DetLinear, fresh_bounds


def _post(t):
    if t.update is None:
        return None, Polyhedron()
    v, u = t.update
    if isinstance(u, DetLinear):
        return (v, u.f), Polyhedron()
    bounds = fresh_bounds(u)
    return (v, u.base + LinExpr.var(FRESH)), bounds if bounds is not None else Polyhedron()


def guard_pool(pcfg: PCFG) -> list[LinConstraint]:
    pool: list[LinConstraint] = []
    for t in pcfg.transitions:
        for a in t.guard:
            if a not in pool:
                pool.append(a)
    return pool


def houdini(pcfg: PCFG, candidates: Mapping[str, list[LinConstraint]]) -> tuple[dict[str, Polyhedron], dict]:
    """Greatest inductive sub-conjunction of ``candidates``.

    Returns the invariant map and, per location, the atoms that were dropped.
    """
    cur: dict[str, list[LinConstraint]] = {}
    for loc in pcfg.locations:
        cur[loc] = [] if loc == pcfg.l_in else list(dict.fromkeys(candidates.get(loc, ())))
    dropped: dict[str, list[LinConstraint]] = {loc: [] for loc in pcfg.locations}
    proven: set = set()
    changed = True
    while changed:
        changed = False
        for t in pcfg.transitions:
            src = Polyhedron(cur[t.source]) & t.guard
            sub, rb = _post(t)
            ante = src & rb
            key_src = (t.id, tuple(cur[t.source]))
            for _, tgt in t.branches:
                keep = []
                for a in cur[tgt]:
                    key = (key_src, a)
                    if key in proven:
                        keep.append(a)
                        continue
                    cons = a.substitute(*sub) if sub is not None else a
                    if find_point(ante & cons.negate()) is None:
                        proven.add(key)
                        keep.append(a)
                    else:
                        dropped[tgt].append(a)
                        changed = True
                cur[tgt] = keep
    return {loc: Polyhedron(a) for loc, a in cur.items()}, dropped


def infer_invariants(pcfg: PCFG, annotations: Optional[Mapping[str, Polyhedron]] = None,
                     loop_invariants: Optional[Mapping[str, Polyhedron]] = None,
                     use_guards: bool = True) -> tuple[dict[str, Polyhedron], dict]:
    """Inductive invariants seeded by annotations, loop annotations and guard atoms.

    Every candidate atom is tried at every location, so an annotation only
    has to be written where it is first needed.  The second result maps
    each location to the annotated atoms it had to give up.
    """
    pool: list[LinConstraint] = guard_pool(pcfg) if use_guards else []
    for source in (annotations or {}, loop_invariants or {}):
        for poly in source.values():
            for a in poly:
                if a not in pool:
                    pool.append(a)
    inv, dropped = houdini(pcfg, {loc: pool for loc in pcfg.locations})
    lost = {}
    for source in (annotations or {}, loop_invariants or {}):
        for loc, poly in source.items():
            missing = [a for a in poly if a in dropped.get(loc, ())]
            if missing:
                lost.setdefault(loc, []).extend(m for m in missing if m not in lost.get(loc, []))
    return inv, lost
