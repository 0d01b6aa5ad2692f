"""Iterative LP-based synthesis of lexicographic ranking supermartingales.

Dimension ``k`` is built from an affine template per location.  First a
single LP tries to rank as many unranked transitions as possible while
keeping ``eta_k`` non-negative on every unranked transition's guard.  When
that ranks nothing, candidate sets ``T`` from the strategy's class are
tried: ``eta_k`` must drop by ``c`` on ``T`` and must not increase in the
worst case on the rest of the unranked transitions.

Strategies: ``STR`` (non-negative everywhere, no second attempt), ``LWN``
(first attempt only), ``SMC`` (singleton candidates) and ``EMC`` (every
non-empty subset, largest first).
"""
from __future__ import annotations

import enum
import itertools
import time
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterable, Mapping, Optional, Sequence

from .farkas import FarkasEncoding, antecedent_empty, farkas_encode
from .linear import LinConstraint, LinExpr, ParamLinExpr, Polyhedron, ZERO, ONE, frac
from .lp import LPProblem, Optimal, find_point, lp_solve, maximize
from .pcfg import PCFG, MeasurableMap, Transition, pre_expectation, successors


class Strategy(enum.Enum):
    STR = "str"
    LWN = "lwn"
    SMC = "smc"
    EMC = "emc"

    @classmethod
    def parse(cls, name: str) -> "Strategy":
        try:
            return cls(name.strip().lower())
        except ValueError:
            raise ValueError(f"unknown strategy {name!r}") from None


NONNEG = "NonNeg"
STRICT = "StrictDecrease"


@dataclass
class Certificate:
    eta: MeasurableMap
    lv: dict
    branch: dict  # dimension -> NONNEG | STRICT
    ranked: dict  # dimension -> tuple of transition ids
    strategy: Strategy
    c: Fraction = ONE
    timings: dict = field(default_factory=dict)

    @property
    def dimension(self) -> int:
        return self.eta.dim


@dataclass
class Failure:
    unranked: tuple
    reason: str  # "no-progress" | "max-dim"
    dimensions: int = 0
    timings: dict = field(default_factory=dict)

    def __bool__(self) -> bool:
        return False


class NoProgress(Exception):
    pass


# solved-LP audit hook: receives (encodings, assignment) for every feasible LP
_solution_hooks: list[Callable] = []


def add_solution_hook(fn: Callable) -> None:
    _solution_hooks.append(fn)


def remove_solution_hook(fn: Callable) -> None:
    _solution_hooks.remove(fn)


def class_enumerate(strategy: Strategy, U: Sequence[str], order: Optional[Mapping[str, int]] = None) -> list:
    """Candidate strictly-ranked sets, in the order they are tried."""
    key = (lambda t: order[t]) if order else _tid_key
    ids = sorted(U, key=key)
    if strategy in (Strategy.STR, Strategy.LWN):
        return []
    if strategy is Strategy.SMC:
        return [(t,) for t in ids]
    out = []
    for size in range(len(ids), 0, -1):
        out += list(itertools.combinations(ids, size))
    return out


def _tid_key(tid: str):
    digits = "".join(ch for ch in tid if ch.isdigit())
    return (int(digits) if digits else 1 << 30, tid)


class _Problem:
    """Shared per-synthesis state: templates, live transitions, LP assembly."""

    def __init__(self, pcfg: PCFG, inv: Mapping[str, Polyhedron], c):
        self.pcfg = pcfg
        self.inv = inv
        self.c = frac(c)
        self.order = {t.id: t.index for t in pcfg.transitions}
        self.poly: dict[str, Polyhedron] = {}
        self.live: set[str] = set()
        for t in pcfg.ranked_transitions:
            p = (inv.get(t.source, Polyhedron()) & t.guard)
            self.poly[t.id] = p
            if find_point(p, pcfg.variables) is not None and not antecedent_empty(p.closure()):
                self.live.add(t.id)

    def template(self, k: int) -> dict[str, ParamLinExpr]:
        tmpl = {}
        for loc in self.pcfg.locations:
            if loc == self.pcfg.l_out:
                tmpl[loc] = ParamLinExpr()
                continue
            coeffs = {v: LinExpr.var(f"η{k}_{loc}_{v}") for v in self.pcfg.variables}
            tmpl[loc] = ParamLinExpr(coeffs, LinExpr.var(f"η{k}_{loc}_c"))
        return tmpl

    def implication(self, encs: list, poly: Polyhedron, consequent: ParamLinExpr, name: str) -> None:
        encs.append(farkas_encode(poly, consequent, name, check_empty=False))

    def solve(self, encs: list, extra_ineq=(), extra_eq=(), objective: LinExpr = LinExpr()):
        ineq: list[LinConstraint] = []
        eqs: list[LinExpr] = list(extra_eq)
        for e in encs:
            ineq += [LinConstraint(x) for x in e.inequalities]
            eqs += e.equalities
        ineq += [LinConstraint(x) for x in extra_ineq]
        res = lp_solve(LPProblem(objective, True, Polyhedron(ineq), tuple(eqs)))
        if isinstance(res, Optimal):
            for hook in list(_solution_hooks):
                hook(encs, res.assignment)
        return res

    def instantiate(self, tmpl: Mapping[str, ParamLinExpr], assignment) -> dict[str, LinExpr]:
        return {loc: e.instantiate(assignment) for loc, e in tmpl.items()}

    def nonneg_everywhere(self, encs: list, tmpl, k: int) -> None:
        for loc in self.pcfg.locations:
            if loc == self.pcfg.l_out:
                continue
            p = self.inv.get(loc, Polyhedron())
            if antecedent_empty(p.closure()):
                continue
            self.implication(encs, p, -tmpl[loc], f"λ_{loc}_st{k}")


def attempt_nonneg_dimension(prob: _Problem, U: Sequence[str], k: int, strong: bool = False):
    """Condition-(6) LP: maximize the number of transitions ranked at dimension ``k``.

    Returns ``(eta_k, ranked)``; raises :class:`NoProgress` when nothing is ranked.
    With ``strong`` the template must be non-negative at every location (STR).
    """
    pcfg, c = prob.pcfg, prob.c
    tmpl = prob.template(k)
    live = [tid for tid in U if tid in prob.live]
    dead = [tid for tid in U if tid not in prob.live]

    def build(fixed: Optional[Mapping[str, Fraction]]):
        encs: list[FarkasEncoding] = []
        extra: list[LinExpr] = []
        eps = {}
        for tid in live:
            t = pcfg.transition(tid)
            if fixed is None:
                e = LinExpr.var(f"ε_{tid}")
                extra += [-e, e - 1]
            else:
                e = LinExpr.constant(fixed[tid])
            eps[tid] = e
            here = tmpl[t.source]
            for j, f in enumerate(pre_expectation(tmpl, t)):
                prob.implication(encs, prob.poly[tid], (f - here).add_const(e * c), f"λ_{tid}_{j}")
            if not strong:
                prob.implication(encs, prob.poly[tid], -here, f"λ_{tid}_nn")
        if strong:
            prob.nonneg_everywhere(encs, tmpl, k)
        return encs, extra, eps

    ranked = list(dead)
    if live:
        encs, extra, eps = build(None)
        objective = sum(eps.values(), LinExpr())
        res = prob.solve(encs, extra, objective=objective)
        if not isinstance(res, Optimal):
            raise NoProgress
        chosen = [tid for tid in live if res.assignment.get(f"ε_{tid}", ZERO) == 1]
        if not chosen and not dead:
            raise NoProgress
        fixed = {tid: (ONE if tid in chosen else ZERO) for tid in live}
        encs, extra, _ = build(fixed)
        res2 = prob.solve(encs, extra)
        if not isinstance(res2, Optimal):
            raise RuntimeError("ranked set not reproducible with fixed slacks")
        ranked += chosen
        eta_k = prob.instantiate(tmpl, res2.assignment)
    else:
        eta_k = {loc: LinExpr() for loc in pcfg.locations}
    return eta_k, sorted(ranked, key=lambda t: prob.order[t])


def _ranked_group(prob: _Problem, tid: str, tmpl) -> list:
    """Implications making ``eta_k`` drop by ``c`` in expectation and stay non-negative on ``tid``."""
    t = prob.pcfg.transition(tid)
    here = tmpl[t.source]
    out = [(prob.poly[tid], (f - here).add_const(LinExpr.constant(prob.c)), f"λ_{tid}_{j}")
           for j, f in enumerate(pre_expectation(tmpl, t))]
    out.append((prob.poly[tid], -here, f"λ_{tid}_nn"))
    return out


def _unranked_group(prob: _Problem, tid: str, tmpl) -> tuple[list, list]:
    """Worst-case non-increase of ``eta_k`` along ``tid`` (plus equalities for unbounded samples)."""
    t = prob.pcfg.transition(tid)
    here = tmpl[t.source]
    imps, eqs = [], []
    j = 0
    for succ in successors(tmpl, t):
        if succ.pinned is not None:
            coeff = tmpl[succ.target].coeff(succ.pinned)
            if not coeff.is_zero():
                eqs.append(coeff)
        for e in succ.exprs:
            imps.append((prob.poly[tid], e - here, f"λ_{tid}_w{j}"))
            j += 1
    return imps, eqs


def _strict_encodings(prob: _Problem, U, T, k, tmpl):
    encs: list[FarkasEncoding] = []
    eqs: list[LinExpr] = []
    for tid in T:
        if tid in prob.live:
            for poly, cons, name in _ranked_group(prob, tid, tmpl):
                prob.implication(encs, poly, cons, name)
    for tid in U:
        if tid in T or tid not in prob.live:
            continue
        imps, e = _unranked_group(prob, tid, tmpl)
        for poly, cons, name in imps:
            prob.implication(encs, poly, cons, name)
        eqs += e
    return encs, eqs


def attempt_strict_dimension(prob: _Problem, U: Sequence[str], T: Sequence[str], k: int):
    """Condition-(7) LP: ``eta_k`` ranks exactly ``T`` and never increases on ``U \\ T``."""
    tmpl = prob.template(k)
    encs, eqs = _strict_encodings(prob, U, set(T), k, tmpl)
    res = prob.solve(encs, extra_eq=eqs)
    if not isinstance(res, Optimal):
        return None
    return prob.instantiate(tmpl, res.assignment)


def _satisfied(imps, eqs, assignment) -> bool:
    """Whether a concrete template instance already meets the given implications."""
    for e in eqs:
        if e.evaluate({u: assignment.get(u, ZERO) for u in e.variables()}) != 0:
            return False
    for poly, cons, _ in imps:
        if antecedent_empty(poly.closure()):
            continue
        res = maximize(cons.instantiate(assignment), poly)
        if not isinstance(res, Optimal) or res.value > 0:
            return False
    return True


def exhaustive_strict_dimension(prob: _Problem, U: Sequence[str], k: int, deadline=None):
    """Largest ``T`` (first in enumeration order among ties) admitting a condition-(7) component.

    Branch and bound over in/out decisions in transition order.  A node
    imposes the ranked constraints on its "in" transitions and worst-case
    non-increase on its "out" ones.  Undecided transitions only get
    non-increase in expectation, which both choices imply, so an
    infeasible node prunes every completion.  Visiting "in" before
    "out" reproduces the order of trying subsets by decreasing size.
    """
    items = sorted((u for u in U if u in prob.live), key=lambda t: prob.order[t])
    tmpl = prob.template(k)
    groups_in = {tid: _ranked_group(prob, tid, tmpl) for tid in items}
    groups_out = {tid: _unranked_group(prob, tid, tmpl) for tid in items}
    best: list = [None, None]

    # Whether ranked or not, a transition never increases eta_k in expectation,
    # so undecided transitions carry that weaker constraint.
    groups_weak = {tid: [(p, cons.add_const(LinExpr.constant(-prob.c)), name.replace("λ_", "λw_"))
                         for p, cons, name in groups_in[tid][:-1]] for tid in items}

    def solve(T_in, T_out, undecided):
        encs: list[FarkasEncoding] = []
        eqs: list[LinExpr] = []
        for tid in T_in:
            for poly, cons, name in groups_in[tid]:
                prob.implication(encs, poly, cons, name)
        for tid in T_out:
            imps, e = groups_out[tid]
            for poly, cons, name in imps:
                prob.implication(encs, poly, cons, name)
            eqs += e
        for tid in undecided:
            for poly, cons, name in groups_weak[tid]:
                prob.implication(encs, poly, cons, name)
        res = prob.solve(encs, extra_eq=eqs)
        return res.assignment if isinstance(res, Optimal) else None

    def dfs(i, T_in, T_out, sol):
        if deadline is not None and time.perf_counter() > deadline:
            raise TimeoutError("synthesis deadline exceeded")
        if best[0] is not None and len(T_in) + len(items) - i <= len(best[0]):
            return
        if i == len(items):
            if T_in:
                best[0], best[1] = list(T_in), sol
            return
        tid = items[i]
        for side in ("in", "out"):
            if side == "in":
                nin, nout, imps, eqs = T_in + [tid], T_out, groups_in[tid], []
            else:
                if best[0] is not None and len(T_in) + len(items) - i - 1 <= len(best[0]):
                    continue
                nin, nout = T_in, T_out + [tid]
                imps, eqs = groups_out[tid]
            if sol is not None and _satisfied(imps, eqs, sol):
                nsol = sol
            else:
                nsol = solve(nin, nout, items[i + 1:])
                if nsol is None:
                    continue
            dfs(i + 1, nin, nout, nsol)

    root = solve([], [], items)
    if root is not None:
        dfs(0, [], [], root)
    if best[0] is None:
        return None
    return prob.instantiate(tmpl, best[1]), best[0]


def synthesize(pcfg: PCFG, inv: Mapping[str, Polyhedron], strategy: Strategy = Strategy.SMC,
               c=1, max_dim: Optional[int] = None, deadline: Optional[float] = None):
    """Build a certificate or report the transitions left unranked."""
    if isinstance(strategy, str):
        strategy = Strategy.parse(strategy)
    t0 = time.perf_counter()
    prob = _Problem(pcfg, inv, c)
    U = [t.id for t in pcfg.ranked_transitions]
    if max_dim is None:
        max_dim = max(1, len(U))
    comps: list[dict[str, LinExpr]] = []
    lv: dict[str, int] = {pcfg.tau_out: 0}
    branch: dict[int, str] = {}
    ranked: dict[int, tuple] = {}
    timings: dict[str, float] = {}
    k = 0
    while U:
        if k >= max_dim:
            timings["total"] = time.perf_counter() - t0
            return Failure(tuple(U), "max-dim", k, timings)
        k += 1
        tk = time.perf_counter()
        if deadline is not None and tk > deadline:
            raise TimeoutError("synthesis deadline exceeded")
        try:
            eta_k, newly = attempt_nonneg_dimension(prob, U, k, strong=strategy is Strategy.STR)
            kind = NONNEG
        except NoProgress:
            eta_k, newly, kind = None, [], STRICT
            live_u = [u for u in U if u in prob.live]
            if strategy is Strategy.EMC:
                found = exhaustive_strict_dimension(prob, U, k, deadline) if live_u else None
                if found is not None:
                    eta_k, newly = found
            else:
                for T in class_enumerate(strategy, live_u, prob.order):
                    if deadline is not None and time.perf_counter() > deadline:
                        raise TimeoutError("synthesis deadline exceeded")
                    sol = attempt_strict_dimension(prob, U, T, k)
                    if sol is not None:
                        eta_k, newly = sol, list(T)
                        break
        if eta_k is None:
            timings["total"] = time.perf_counter() - t0
            return Failure(tuple(U), "no-progress", k - 1, timings)
        comps.append(eta_k)
        for tid in newly:
            lv[tid] = k
        branch[k] = kind
        ranked[k] = tuple(newly)
        U = [u for u in U if u not in newly]
        timings[f"dim{k}"] = time.perf_counter() - tk
    dim = len(comps)
    exprs = {loc: tuple(comps[j][loc] for j in range(dim)) for loc in pcfg.locations}
    timings["total"] = time.perf_counter() - t0
    return Certificate(MeasurableMap(dim, exprs), lv, branch, ranked, strategy, prob.c, timings)


def matching_flavor(strategy: Strategy):
    from .checker import Flavor

    return {Strategy.STR: Flavor.ST, Strategy.LWN: Flavor.LW,
            Strategy.SMC: Flavor.SC_MCLC, Strategy.EMC: Flavor.SC_MCLC}[strategy]
