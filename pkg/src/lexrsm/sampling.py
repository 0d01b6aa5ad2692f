"""Sampling-based soundness audit of solved Farkas encodings.

Every feasible LP found during synthesis instantiates implications
``x in P  =>  c.x + d <= 0``.  This module draws points from ``P`` by
hit-and-run and evaluates the instantiated consequent on them, which
gives an independent (floating-point, statistical) check that the
multipliers really certify the implication.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from .linear import LinExpr, Polyhedron
from .lp import find_point

TOL = 1e-6  # relative to the consequent's coefficient scale


def _matrix(poly: Polyhedron, variables: Sequence[str]):
    rows = [c.expr for c in poly.closure()]
    A = np.array([[float(e.coeff(v)) for v in variables] for e in rows], dtype=float)
    A = A.reshape(len(rows), len(variables))
    b = np.array([-float(e.const) for e in rows], dtype=float)
    return A, b


def sample_points(poly: Polyhedron, variables: Sequence[str], n: int,
                  rng: Optional[np.random.Generator] = None, radius: float = 1e3,
                  chains: int = 64) -> Optional[np.ndarray]:
    """``n`` points of the closure of ``poly`` (rows follow ``variables``), or None if empty.

    Hit-and-run from an exact interior-or-boundary point; unbounded
    directions are truncated at ``radius`` around the start point.
    """
    rng = rng or np.random.default_rng(0)
    variables = list(variables)
    start = find_point(poly.closure(), variables)
    if start is None:
        return None
    x0 = np.array([float(start.get(v, 0)) for v in variables], dtype=float)
    if not variables:
        return np.zeros((n, 0))
    A, b = _matrix(poly, variables)
    x = np.tile(x0, (chains, 1))
    out = np.empty((n, len(variables)))
    filled = 0
    while filled < n:
        d = rng.standard_normal(x.shape)
        d /= np.linalg.norm(d, axis=1, keepdims=True)
        lo = np.full(chains, -radius)
        hi = np.full(chains, radius)
        if len(b):
            ad = d @ A.T  # chains x rows
            slack = b[None, :] - x @ A.T
            slack = np.maximum(slack, 0.0)
            with np.errstate(divide="ignore", invalid="ignore"):
                t = slack / ad
            hi = np.minimum(hi, np.where(ad > 1e-12, t, np.inf).min(axis=1))
            lo = np.maximum(lo, np.where(ad < -1e-12, t, -np.inf).max(axis=1))
        lo = np.minimum(lo, 0.0)
        hi = np.maximum(hi, 0.0)
        x = x + d * rng.uniform(lo, hi)[:, None]
        take = min(chains, n - filled)
        out[filled:filled + take] = x[:take]
        filled += take
    return out


@dataclass
class ImplicationAudit:
    antecedent: Polyhedron
    consequent: LinExpr
    samples: int
    worst: float  # largest sampled value of the consequent (should be <= 0)

    @property
    def ok(self) -> bool:
        scale = 1.0 + max((abs(float(c)) for c in self.consequent.coeffs.values()), default=0.0) \
            + abs(float(self.consequent.const))
        return self.worst <= TOL * scale


def audit_implication(poly: Polyhedron, consequent: LinExpr, n: int = 10_000,
                      rng: Optional[np.random.Generator] = None) -> Optional[ImplicationAudit]:
    variables = sorted(poly.variables() | consequent.variables())
    pts = sample_points(poly, variables, n, rng)
    if pts is None:
        return None  # vacuous
    coef = np.array([float(consequent.coeff(v)) for v in variables])
    vals = pts @ coef + float(consequent.const)
    return ImplicationAudit(poly, consequent, n, float(vals.max(initial=-np.inf)))


@dataclass
class SoundnessRecorder:
    """Collects instantiated implications from solved LPs (see ``add_solution_hook``)."""

    seen: dict = field(default_factory=dict)
    solutions: int = 0

    def __call__(self, encs, assignment) -> None:
        self.solutions += 1
        for enc in encs:
            cons = enc.consequent.instantiate(assignment)
            self.seen.setdefault((enc.antecedent, cons), None)

    def audit(self, n: int = 10_000, seed: int = 0) -> list[ImplicationAudit]:
        rng = np.random.default_rng(seed)
        out = []
        for poly, cons in self.seen:
            res = audit_implication(poly, cons, n, rng)
            if res is not None:
                out.append(res)
        return out
