"""Farkas-lemma encoding of universally quantified linear implications.

An implication ``forall x. P(x) => c(u).x + d(u) <= 0`` with numeric
antecedent ``P = {a_i.x + e_i <= 0}`` (non-empty) holds iff there are
multipliers ``lambda_i >= 0`` with ``sum_i lambda_i a_i = c(u)`` and
``-sum_i lambda_i e_i + d(u) <= 0``.  Both conditions are linear in the
joint vector ``(lambda, u)``, so a whole family of implications becomes
one LP over the template unknowns ``u``.

Strict atoms in ``P`` are closed to ``<=`` before encoding.  The closure
is a superset of the original set, so any certificate found this way is
also valid for the strict antecedent; the price is possible
incompleteness at the boundary.
"""
from __future__ import annotations

from dataclasses import dataclass
from functools import lru_cache
from typing import Callable, Optional

from .linear import LinExpr, ParamLinExpr, Polyhedron
from .lp import is_empty_closure


class UnsatisfiableAntecedent(ValueError):
    """The antecedent polyhedron is empty; the implication is vacuous."""


@dataclass(frozen=True)
class FarkasEncoding:
    antecedent: Polyhedron
    consequent: ParamLinExpr
    multipliers: tuple[str, ...]
    inequalities: tuple[LinExpr, ...]
    equalities: tuple[LinExpr, ...]


@lru_cache(maxsize=65536)
def antecedent_empty(poly: Polyhedron) -> bool:
    return is_empty_closure(poly)


_recorder: Optional[Callable[[FarkasEncoding], None]] = None


def set_recorder(hook: Optional[Callable[[FarkasEncoding], None]]) -> Optional[Callable]:
    """Install a callback receiving every emitted encoding; returns the previous one."""
    global _recorder
    prev, _recorder = _recorder, hook
    return prev


def farkas_encode(poly: Polyhedron, consequent: ParamLinExpr, prefix: str = "λ",
                  check_empty: bool = True) -> FarkasEncoding:
    """Encode ``forall x in closure(poly). consequent(x) <= 0``.

    Multipliers are named ``f"{prefix}_{row}"``.  Every emitted inequality
    reads ``expr <= 0`` and every equality ``expr == 0``.
    """
    closed = poly.closure()
    if check_empty and antecedent_empty(closed):
        raise UnsatisfiableAntecedent(str(poly))
    rows = closed.constraints
    names = tuple(f"{prefix}_{i}" for i in range(len(rows)))
    lams = [LinExpr.var(n) for n in names]

    ineqs = [-lam for lam in lams]
    variables = sorted(closed.variables() | consequent.variables())
    eqs = []
    for v in variables:
        s = LinExpr()
        for lam, row in zip(lams, rows):
            a = row.expr.coeff(v)
            if a:
                s = s + lam * a
        eq = s - consequent.coeff(v)
        if not eq.is_zero():
            eqs.append(eq)
    bound = consequent.const
    for lam, row in zip(lams, rows):
        if row.expr.const:
            bound = bound - lam * row.expr.const
    ineqs.append(bound)
    enc = FarkasEncoding(poly, consequent, names, tuple(ineqs), tuple(eqs))
    if _recorder is not None:
        _recorder(enc)
    return enc
