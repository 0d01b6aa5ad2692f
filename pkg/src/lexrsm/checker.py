"""Independent verification of LexRSM certificates.

Every clause is decided by an exact LP query on the polyhedron of states
where it must hold, strict atoms included, so a failing clause always
comes with a rational witness point inside the antecedent that falsifies
the consequent.
"""
from __future__ import annotations

import enum
import json
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional, Sequence

from .linear import LinConstraint, LinExpr, Polyhedron, frac
from .lp import find_point
from .pcfg import (PCFG, FRESH, DetLinear, MeasurableMap, Ndet, Sample, Transition,
                   fresh_bounds, pre_expectation, successors, validate_level_map)


class Flavor(enum.Enum):
    ST = "st"
    LW = "lw"
    SC = "sc"
    SC_MCLC = "sc_mclc"
    LLEX = "llex"

    @classmethod
    def parse(cls, name: str) -> "Flavor":
        key = name.strip().lower().replace("-", "_")
        for f in cls:
            if f.value == key or f.name.lower() == key:
                return f
        raise ValueError(f"unknown flavor {name!r}")


CLAUSES = ("invariant-inductiveness", "ranking", "non-negativity", "mclc", "stability")


@dataclass(frozen=True)
class Violation:
    clause: str
    transition: Optional[str]
    dimension: Optional[int]
    witness: Mapping[str, Fraction]
    antecedent: Polyhedron = field(default_factory=Polyhedron)
    consequent: Optional[LinConstraint] = None
    location: Optional[str] = None
    detail: str = ""

    def to_json(self) -> dict:
        return {
            "clause": self.clause,
            "transition": self.transition,
            "location": self.location,
            "dimension": self.dimension,
            "witness": {k: str(v) for k, v in self.witness.items()},
            "detail": self.detail,
        }

    def __str__(self) -> str:
        where = self.transition or self.location or "-"
        dim = f" dim {self.dimension}" if self.dimension is not None else ""
        pt = ", ".join(f"{k}={v}" for k, v in self.witness.items())
        return f"[{self.clause}] {where}{dim}: {self.detail} (witness: {pt or 'any state'})"


@dataclass
class Verdict:
    violations: list = field(default_factory=list)
    inconclusive: list = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations and not self.inconclusive

    @property
    def status(self) -> str:
        if self.violations:
            return "violations"
        return "inconclusive" if self.inconclusive else "ok"

    def extend(self, other: "Verdict") -> "Verdict":
        self.violations += other.violations
        self.inconclusive += other.inconclusive
        return self

    def to_json(self) -> dict:
        return {"status": self.status,
                "violations": [v.to_json() for v in self.violations],
                "inconclusive": [v.to_json() for v in self.inconclusive]}

    def report(self) -> str:
        if self.ok:
            return "OK"
        lines = [self.status.upper()]
        lines += [f"  {v}" for v in self.violations]
        lines += [f"  (inconclusive) {v}" for v in self.inconclusive]
        return "\n".join(lines)


def _clause_failure(poly: Polyhedron, cons: LinConstraint, variables) -> Optional[dict]:
    return find_point(poly & cons.negate(), variables)


def _ge0(e: LinExpr) -> LinConstraint:
    return LinConstraint(-e, False)


def _state(pcfg: PCFG, inv: Mapping[str, Polyhedron], t: Transition) -> Polyhedron:
    return inv.get(t.source, Polyhedron()) & t.guard


def _nonempty(poly: Polyhedron, variables) -> bool:
    return find_point(poly, variables) is not None


class _Ctx:
    def __init__(self, pcfg, inv, eta, lv, c):
        validate_level_map(pcfg, lv, eta.dim)
        missing = set(pcfg.locations) - set(eta.exprs)
        if missing:
            raise ValueError(f"measurable map lacks locations {sorted(missing)}")
        self.pcfg = pcfg
        self.inv = inv
        self.eta = eta
        self.lv = lv
        self.c = frac(c)
        self.vars = pcfg.variables
        self.live = []
        for t in pcfg.ranked_transitions:
            poly = _state(pcfg, inv, t)
            if _nonempty(poly, self.vars):
                self.live.append((t, poly))


def _ranking(ctx: _Ctx) -> list[Violation]:
    out = []
    for t, poly in ctx.live:
        lvl = ctx.lv[t.id]
        for k in range(1, lvl + 1):
            comp = ctx.eta.component(k)
            here = comp[t.source]
            for f in pre_expectation(comp, t):
                slack = ctx.c if k == lvl else 0
                cons = LinConstraint(f - here + slack, False)
                w = _clause_failure(poly, cons, ctx.vars)
                if w is not None:
                    need = f"drop by {ctx.c}" if k == lvl else "no increase"
                    out.append(Violation("ranking", t.id, k, w, poly, cons, t.source,
                                         f"pre-expectation {f} vs {here}: {need}"))
    return out


def _nonneg(ctx: _Ctx, flavor: Flavor) -> list[Violation]:
    out = []
    if flavor is Flavor.ST:
        for loc in ctx.pcfg.locations:
            poly = ctx.inv.get(loc, Polyhedron())
            for k in range(1, ctx.eta.dim + 1):
                e = ctx.eta.at(loc, k)
                w = _clause_failure(poly, _ge0(e), ctx.vars)
                if w is not None:
                    out.append(Violation("non-negativity", None, k, w, poly, _ge0(e), loc,
                                         f"{e} may be negative at {loc}"))
        return out
    for t, poly in ctx.live:
        lvl = ctx.lv[t.id]
        dims = range(1, lvl + 1) if flavor is Flavor.LW else (lvl,)
        for k in dims:
            e = ctx.eta.at(t.source, k)
            w = _clause_failure(poly, _ge0(e), ctx.vars)
            if w is not None:
                out.append(Violation("non-negativity", t.id, k, w, poly, _ge0(e), t.source,
                                     f"{e} may be negative"))
    return out


def check_mclc(pcfg: PCFG, inv: Mapping[str, Polyhedron], eta: MeasurableMap,
               lv: Mapping[str, int], c=1, _ctx: Optional[_Ctx] = None) -> Verdict:
    """Per dimension, leftward non-negativity or worst-case non-increase for all strictly-right levels."""
    ctx = _ctx or _Ctx(pcfg, inv, eta, lv, c)
    verdict = Verdict()
    for k in range(1, eta.dim + 1):
        left = [(t, p) for t, p in ctx.live if k < ctx.lv[t.id]]
        if not left:
            continue
        comp = eta.component(k)
        fail6 = fail7 = None
        for t, poly in left:
            e = comp[t.source]
            w = _clause_failure(poly, _ge0(e), ctx.vars)
            if w is not None:
                fail6 = Violation("mclc", t.id, k, w, poly, _ge0(e), t.source,
                                  f"(6) non-negativity fails: {e}")
                break
        if fail6 is None:
            continue
        for t, poly in left:
            here = comp[t.source]
            for succ in successors(comp, t):
                if succ.pinned is not None and comp[succ.target].coeff(succ.pinned):
                    w = find_point(poly, ctx.vars)
                    fail7 = Violation("mclc", t.id, k, w, poly, None, t.source,
                                      f"(7) successor unbounded: {succ.pinned} is sampled from an "
                                      f"unbounded distribution but {succ.target} depends on it")
                    break
                for e in succ.exprs:
                    cons = LinConstraint(e - here, False)
                    w = _clause_failure(poly, cons, ctx.vars)
                    if w is not None:
                        fail7 = Violation("mclc", t.id, k, w, poly, cons, t.source,
                                          f"(7) successor value {e} at {succ.target} exceeds {here}")
                        break
                if fail7:
                    break
            if fail7:
                break
        if fail7 is not None:
            verdict.violations += [fail6, fail7]
    return verdict


def _post(t: Transition, poly_s: Polyhedron):
    """Substitution for the successor state plus constraints on the fresh update value."""
    if t.update is None:
        return None, Polyhedron()
    v, u = t.update
    if isinstance(u, DetLinear):
        return (v, u.f), Polyhedron()
    bounds = fresh_bounds(u)
    return (v, u.base + LinExpr.var(FRESH)), bounds if bounds is not None else Polyhedron()


def check_stability_at_negativity(pcfg: PCFG, inv: Mapping[str, Polyhedron], eta: MeasurableMap,
                                  lv: Mapping[str, int], c=1, closed: bool = False,
                                  _ctx: Optional[_Ctx] = None) -> Verdict:
    """Once a strictly-left component is negative it stays negative.

    A successor ``s'`` reached from ``s`` with ``eta[k](s) < 0`` must satisfy
    ``eta[k](s') < 0`` unless no transition with level ``>= k`` is enabled at
    ``s'``.  The exact mode decides this with strict atoms.  ``closed`` first
    tries the closed antecedent ``eta[k](s) <= 0`` (a pass there implies the
    exact clause) and reports boundary-only failures as inconclusive.
    """
    ctx = _ctx or _Ctx(pcfg, inv, eta, lv, c)
    verdict = Verdict()
    for t, poly in ctx.live:
        lvl = ctx.lv[t.id]
        sub, rbounds = _post(t, poly)
        for k in range(1, lvl):
            comp = eta.component(k)
            here = comp[t.source]
            for _, tgt in t.branches:
                nxt = comp[tgt]
                if sub is not None:
                    nxt = nxt.substitute(*sub)
                for t2 in pcfg.outgoing(tgt):
                    if lv[t2.id] < k:
                        continue
                    g = t2.guard.substitute(*sub) if sub is not None else t2.guard
                    base = poly & rbounds & g
                    stays_neg = LinConstraint(nxt, True)
                    exact_ante = base & LinConstraint(here, True)
                    w = find_point(exact_ante & stays_neg.negate(), ctx.vars)
                    detail = (f"{here} < 0 but successor {nxt} at {tgt} may be >= 0 "
                              f"while {t2.id} (level {lv[t2.id]}) is enabled")
                    if w is not None:
                        verdict.violations.append(
                            Violation("stability", t.id, k, w, exact_ante, stays_neg, t.source, detail))
                        continue
                    if closed:
                        closed_ante = base & LinConstraint(here, False)
                        w = find_point(closed_ante.closure() & stays_neg.negate(), ctx.vars)
                        if w is not None:
                            verdict.inconclusive.append(
                                Violation("stability", t.id, k, w, closed_ante, stays_neg, t.source,
                                          "boundary case: " + detail))
    return verdict


def audit_invariant(pcfg: PCFG, inv: Mapping[str, Polyhedron]) -> Verdict:
    """Check that ``inv`` holds initially and is closed under every transition."""
    verdict = Verdict()
    vars_ = pcfg.variables
    for atom in inv.get(pcfg.l_in, Polyhedron()):
        w = _clause_failure(Polyhedron(), atom, vars_)
        if w is not None:
            verdict.violations.append(Violation("invariant-inductiveness", None, None, w, Polyhedron(),
                                                atom, pcfg.l_in,
                                                f"initial invariant atom {atom} excludes some initial states"))
    for t in pcfg.transitions:
        poly = _state(pcfg, inv, t)
        sub, rbounds = _post(t, poly)
        ante = poly & rbounds
        for _, tgt in t.branches:
            for atom in inv.get(tgt, Polyhedron()):
                cons = atom.substitute(*sub) if sub is not None else atom
                w = _clause_failure(ante, cons, vars_)
                if w is not None:
                    verdict.violations.append(Violation(
                        "invariant-inductiveness", t.id, None, w, ante, cons, tgt,
                        f"atom {atom} of {tgt} not preserved by {t.id}"))
    return verdict


def check_certificate(pcfg: PCFG, inv: Mapping[str, Polyhedron], eta: MeasurableMap,
                      lv: Mapping[str, int], flavor: Flavor = Flavor.SC_MCLC, c=1,
                      closed: bool = False) -> Verdict:
    if isinstance(flavor, str):
        flavor = Flavor.parse(flavor)
    ctx = _Ctx(pcfg, inv, eta, lv, c)
    verdict = Verdict(_ranking(ctx))
    nonneg_flavor = flavor if flavor in (Flavor.ST, Flavor.LW) else Flavor.SC
    verdict.violations += _nonneg(ctx, nonneg_flavor)
    if flavor is Flavor.SC_MCLC:
        verdict.extend(check_mclc(pcfg, inv, eta, lv, c, ctx))
    elif flavor is Flavor.LLEX:
        verdict.extend(check_stability_at_negativity(pcfg, inv, eta, lv, c, closed, ctx))
    order = {t.id: t.index for t in pcfg.transitions}
    key = lambda v: (order.get(v.transition, -1), v.location or "", v.dimension or 0,
                     CLAUSES.index(v.clause))
    verdict.violations.sort(key=key)
    verdict.inconclusive.sort(key=key)
    return verdict


def verdict_json(verdict: Verdict) -> str:
    return json.dumps(verdict.to_json(), indent=2)
