"""Probabilistic control-flow graphs and linear measurable maps.

A pCFG has locations, program variables and *generalized* transitions:
each transition leaves one location, is enabled under a linear guard,
optionally updates one variable, and then moves to one of several target
locations according to a finite distribution.  The terminal location
carries a unique guard-free self-loop.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional, Sequence, Union

from .linear import LinConstraint, LinExpr, ParamLinExpr, Polyhedron, ZERO, ONE, frac
from .lp import find_point

Expr = Union[LinExpr, ParamLinExpr]
InvariantMap = dict  # location -> Polyhedron


class ModelError(ValueError):
    pass


class UndefinedTarget(KeyError):
    pass


# --- distributions -------------------------------------------------------

@dataclass(frozen=True)
class DiracConst:
    value: Fraction

    def __post_init__(self):
        object.__setattr__(self, "value", frac(self.value))

    @property
    def mean(self) -> Fraction:
        return self.value

    bounded_support = True

    @property
    def support(self) -> tuple[Fraction, Fraction]:
        return (self.value, self.value)

    def __str__(self) -> str:
        return f"dirac({self.value})"


@dataclass(frozen=True)
class Uniform:
    lo: Fraction
    hi: Fraction

    def __post_init__(self):
        object.__setattr__(self, "lo", frac(self.lo))
        object.__setattr__(self, "hi", frac(self.hi))
        if self.lo > self.hi:
            raise ModelError(f"uniform distribution with lo > hi: [{self.lo}, {self.hi}]")

    @property
    def mean(self) -> Fraction:
        return (self.lo + self.hi) / 2

    bounded_support = True

    @property
    def support(self) -> tuple[Fraction, Fraction]:
        return (self.lo, self.hi)

    def __str__(self) -> str:
        return f"unif({self.lo},{self.hi})"


@dataclass(frozen=True)
class Normal:
    mu: Fraction
    sigma: Fraction

    def __post_init__(self):
        object.__setattr__(self, "mu", frac(self.mu))
        object.__setattr__(self, "sigma", frac(self.sigma))
        if self.sigma <= 0:
            raise ModelError("normal distribution needs a positive standard deviation")

    @property
    def mean(self) -> Fraction:
        return self.mu

    bounded_support = False
    support = None

    def __str__(self) -> str:
        return f"norm({self.mu},{self.sigma})"


Distribution = Union[DiracConst, Uniform, Normal]


# --- updates -------------------------------------------------------------

@dataclass(frozen=True)
class DetLinear:
    f: LinExpr


@dataclass(frozen=True)
class Sample:
    """``v := base + X`` with ``X`` drawn from ``dist``."""

    dist: Distribution
    base: LinExpr = field(default_factory=LinExpr)


@dataclass(frozen=True)
class Ndet:
    """``v := base + r`` with ``r`` chosen by the scheduler in ``[lo, hi]``."""

    lo: Fraction
    hi: Fraction
    base: LinExpr = field(default_factory=LinExpr)

    def __post_init__(self):
        object.__setattr__(self, "lo", frac(self.lo))
        object.__setattr__(self, "hi", frac(self.hi))
        if self.lo > self.hi:
            raise ModelError(f"empty nondeterministic interval [{self.lo}, {self.hi}]")


UpdateElem = Union[DetLinear, Sample, Ndet]


@dataclass(frozen=True)
class Transition:
    id: str
    source: str
    branches: tuple[tuple[Fraction, str], ...]
    update: Optional[tuple[str, UpdateElem]] = None
    guard: Polyhedron = field(default_factory=Polyhedron)
    index: int = 0

    @property
    def targets(self) -> tuple[str, ...]:
        return tuple(t for _, t in self.branches)

    @property
    def is_probabilistic(self) -> bool:
        return len(self.branches) > 1

    def describe(self) -> str:
        tgt = " | ".join(f"{p}:{t}" if len(self.branches) > 1 else t for p, t in self.branches)
        upd = ""
        if self.update is not None:
            upd = f" {self.update[0]} := {describe_update(self.update[1])}"
        g = "" if self.guard.is_true() else f" [{self.guard}]"
        return f"{self.id}: {self.source} -> {tgt}{g}{upd}"


def describe_update(u: UpdateElem) -> str:
    if isinstance(u, DetLinear):
        return str(u.f)
    if isinstance(u, Sample):
        return f"{u.base} + sample({u.dist})" if not u.base.is_zero() else f"sample({u.dist})"
    rng = f"ndet({u.lo},{u.hi})"
    return f"{u.base} + {rng}" if not u.base.is_zero() else rng


TAU_OUT = "t_out"


@dataclass(frozen=True)
class PCFG:
    variables: tuple[str, ...]
    locations: tuple[str, ...]
    transitions: tuple[Transition, ...]
    l_in: str
    l_out: str
    tau_out: str = TAU_OUT

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        locs = set(self.locations)
        if self.l_in not in locs or self.l_out not in locs:
            raise ModelError("initial and terminal locations must be declared")
        ids = [t.id for t in self.transitions]
        if len(set(ids)) != len(ids):
            raise ModelError("duplicate transition ids")
        vars_ = set(self.variables)
        for t in self.transitions:
            if t.source not in locs:
                raise ModelError(f"{t.id}: unknown source {t.source}")
            if not t.branches:
                raise ModelError(f"{t.id}: no branches")
            total = ZERO
            for p, tgt in t.branches:
                if tgt not in locs:
                    raise ModelError(f"{t.id}: unknown target {tgt}")
                if p <= 0:
                    raise ModelError(f"{t.id}: branch probability {p} is not positive")
                total += p
            if total != 1:
                raise ModelError(f"{t.id}: branch probabilities sum to {total}, not 1")
            used = set(t.guard.variables())
            if t.update is not None:
                v, u = t.update
                used.add(v)
                if isinstance(u, DetLinear):
                    used |= u.f.variables()
                else:
                    used |= u.base.variables()
            if not used <= vars_:
                raise ModelError(f"{t.id}: undeclared variables {sorted(used - vars_)}")
        outs = [t for t in self.transitions if t.source == self.l_out]
        if len(outs) != 1 or outs[0].id != self.tau_out:
            raise ModelError("terminal location needs exactly one outgoing transition, the terminal self-loop")
        t = outs[0]
        if t.targets != (self.l_out,) or t.update is not None or not t.guard.is_true():
            raise ModelError("terminal transition must be an unguarded self-loop without update")

    def transition(self, tid: str) -> Transition:
        for t in self.transitions:
            if t.id == tid:
                return t
        raise KeyError(tid)

    def outgoing(self, loc: str) -> list[Transition]:
        return [t for t in self.transitions if t.source == loc]

    def incoming(self, loc: str) -> list[Transition]:
        return [t for t in self.transitions if loc in t.targets]

    @property
    def ranked_transitions(self) -> list[Transition]:
        """All transitions except the terminal self-loop."""
        return [t for t in self.transitions if t.id != self.tau_out]

    @property
    def has_prob_branching(self) -> bool:
        return any(t.is_probabilistic for t in self.transitions)

    @property
    def has_prob_assignment(self) -> bool:
        return any(t.update is not None and isinstance(t.update[1], Sample)
                   and not isinstance(t.update[1].dist, DiracConst) for t in self.transitions)

    def describe(self) -> str:
        lines = [f"variables: {', '.join(self.variables)}",
                 f"locations: {', '.join(self.locations)} (in: {self.l_in}, out: {self.l_out})"]
        lines += [t.describe() for t in self.transitions]
        return "\n".join(lines)


# --- measurable maps -----------------------------------------------------

@dataclass(frozen=True)
class MeasurableMap:
    """``exprs[loc][k-1]`` is the k-th component at ``loc`` (1-indexed dimensions)."""

    dim: int
    exprs: Mapping[str, tuple[LinExpr, ...]]

    def __post_init__(self):
        for loc, vec in self.exprs.items():
            if len(vec) != self.dim:
                raise ModelError(f"map at {loc} has {len(vec)} components, expected {self.dim}")

    def component(self, k: int) -> dict[str, LinExpr]:
        return {loc: vec[k - 1] for loc, vec in self.exprs.items()}

    def at(self, loc: str, k: int) -> LinExpr:
        return self.exprs[loc][k - 1]

    def evaluate(self, loc: str, point: Mapping[str, Fraction]) -> tuple[Fraction, ...]:
        return tuple(e.evaluate(point) for e in self.exprs[loc])


LevelMap = dict  # transition id -> int


def validate_level_map(pcfg: PCFG, lv: Mapping[str, int], dim: int) -> None:
    for t in pcfg.transitions:
        if t.id not in lv:
            raise ModelError(f"level map misses transition {t.id}")
        k = lv[t.id]
        if not 0 <= k <= dim:
            raise ModelError(f"level {k} of {t.id} outside 0..{dim}")
        if (k == 0) != (t.id == pcfg.tau_out):
            raise ModelError(f"level 0 is reserved for the terminal transition ({t.id} has {k})")


# --- pre-expectation -----------------------------------------------------

def _target_expr(eta_k: Mapping[str, Expr], loc: str) -> Expr:
    try:
        return eta_k[loc]
    except KeyError:
        raise UndefinedTarget(loc) from None


def _weighted(eta_k: Mapping[str, Expr], tau: Transition) -> Expr:
    total = None
    for p, tgt in tau.branches:
        term = _target_expr(eta_k, tgt) * p
        total = term if total is None else total + term
    return total


def pre_expectation(eta_k: Mapping[str, Expr], tau: Transition) -> list[Expr]:
    """Affine pieces whose pointwise max is the maximal pre-expectation of ``eta_k`` along ``tau``."""
    e = _weighted(eta_k, tau)
    if tau.update is None:
        return [e]
    v, u = tau.update
    if isinstance(u, DetLinear):
        return [e.substitute(v, u.f)]
    if isinstance(u, Sample):
        return [e.substitute(v, u.base + u.dist.mean)]
    return [e.substitute(v, u.base + u.lo), e.substitute(v, u.base + u.hi)]


@dataclass(frozen=True)
class Successor:
    """Worst-case successor values of one branch target.

    ``exprs`` range over the pre-state and cover every extreme value of the
    update.  ``pinned`` is set for unbounded updates: the value only stays
    bounded when the target's coefficient of ``pinned`` is zero.
    """

    target: str
    exprs: tuple
    pinned: Optional[str] = None


def successors(eta_k: Mapping[str, Expr], tau: Transition) -> list[Successor]:
    out = []
    for _, tgt in tau.branches:
        e = _target_expr(eta_k, tgt)
        if tau.update is None:
            out.append(Successor(tgt, (e,)))
            continue
        v, u = tau.update
        if isinstance(u, DetLinear):
            out.append(Successor(tgt, (e.substitute(v, u.f),)))
        elif isinstance(u, Ndet):
            out.append(Successor(tgt, (e.substitute(v, u.base + u.lo), e.substitute(v, u.base + u.hi))))
        elif u.dist.bounded_support:
            lo, hi = u.dist.support
            pts = (lo,) if lo == hi else (lo, hi)
            out.append(Successor(tgt, tuple(e.substitute(v, u.base + c) for c in pts)))
        else:
            out.append(Successor(tgt, (e.substitute(v, u.base + u.dist.mean),), pinned=v))
    return out


def pinned_coefficient(eta_k: Mapping[str, Expr], succ: Successor):
    """Coefficient of the pinned variable in the target expression."""
    return _target_expr(eta_k, succ.target).coeff(succ.pinned)


# --- post-images for invariant checks ------------------------------------

def post_images(tau: Transition) -> list[tuple[str, Optional[tuple[str, LinExpr]], Optional[str]]]:
    """Per-target substitutions describing the successor state.

    Each item is ``(target, (var, replacement) or None, fresh)``; when
    ``fresh`` is a variable name the update value is arbitrary within
    ``[lo, hi]`` bounds returned by :func:`fresh_bounds`.
    """
    items = []
    for _, tgt in tau.branches:
        if tau.update is None:
            items.append((tgt, None, None))
            continue
        v, u = tau.update
        if isinstance(u, DetLinear):
            items.append((tgt, (v, u.f), None))
        else:
            items.append((tgt, (v, u.base + LinExpr.var(FRESH)), FRESH))
    return items


FRESH = "__r"


def fresh_bounds(u: UpdateElem) -> Optional[Polyhedron]:
    """Range of the fresh update value, or None when unbounded."""
    r = LinExpr.var(FRESH)
    if isinstance(u, Ndet):
        return Polyhedron([LinConstraint(u.lo - r), LinConstraint(r - u.hi)])
    if isinstance(u, Sample) and u.dist.bounded_support:
        lo, hi = u.dist.support
        return Polyhedron([LinConstraint(lo - r), LinConstraint(r - hi)])
    return None


# --- deadlock freedom ----------------------------------------------------

def deadlock_report(pcfg: PCFG, inv: Mapping[str, Polyhedron], cap: int = 4096) -> dict[str, object]:
    """Per location: True (covered), a witness point (deadlock), or "unverified"."""
    report: dict[str, object] = {}
    for loc in pcfg.locations:
        outs = pcfg.outgoing(loc)
        base = inv.get(loc, Polyhedron())
        if any(t.guard.is_true() for t in outs):
            report[loc] = True
            continue
        if not outs:
            pt = find_point(base, pcfg.variables)
            report[loc] = True if pt is None else pt
            continue
        negs = [[a.negate() for a in t.guard] for t in outs]
        n = 1
        for ns in negs:
            n *= len(ns)
        if n > cap:
            report[loc] = "unverified"
            continue
        verdict: object = True
        for combo in itertools.product(*negs):
            pt = find_point(base & combo, pcfg.variables)
            if pt is not None:
                verdict = pt
                break
        report[loc] = verdict
    return report
