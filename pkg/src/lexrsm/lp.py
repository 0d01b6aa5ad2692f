"""Exact rational linear programming.

Two-phase primal simplex over GMP rationals (``gmpy2.mpq``) on a sparse
tableau; inputs and results are :class:`fractions.Fraction`.  Pivoting follows Bland's rule (lowest eligible column enters,
ratio ties leave by lowest basic column), which makes every run
deterministic and cycle-free.

Strict inequalities are not accepted by :func:`lp_solve`.  Decision
procedures built on top of it come in two flavours:

* :func:`entails` works on the topological closure of the antecedent, as
  used by Farkas-based synthesis.  Relaxing ``<`` to ``<=`` in the
  antecedent only enlarges the quantified set, so a positive answer is
  sound for the original (strict) antecedent.  A strict consequent is
  checked as non-strict, so ``entails`` may accept ``P => e < 0`` when the
  supremum of ``e`` over ``P`` is exactly ``0``.
* :func:`entails_exact` and :func:`find_point` respect strict atoms
  exactly by maximising a shared slack ``t`` subject to ``e + t <= 0`` for
  every strict atom.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Mapping, Optional

from gmpy2 import mpq

from .linear import LinConstraint, LinExpr, Polyhedron, ZERO, ONE


@dataclass(frozen=True)
class LPProblem:
    objective: LinExpr
    maximize: bool = True
    constraints: Polyhedron = field(default_factory=Polyhedron)
    equalities: tuple[LinExpr, ...] = ()


class LPResult:
    is_optimal = False


@dataclass(frozen=True)
class Infeasible(LPResult):
    def __repr__(self) -> str:
        return "Infeasible()"


@dataclass(frozen=True)
class Unbounded(LPResult):
    def __repr__(self) -> str:
        return "Unbounded()"


@dataclass(frozen=True)
class Optimal(LPResult):
    """Optimum with a dual certificate.

    ``sign * (objective(x) - value) == sum(multipliers[i] * g_i(x)) +
    sum(eq_multipliers[j] * h_j(x))`` holds identically in ``x``, where
    ``g_i`` are the constraint expressions (``g_i <= 0``), ``h_j`` the
    equalities and ``sign`` is ``+1`` when maximising, ``-1`` otherwise.
    All ``multipliers`` are non-negative.
    """

    value: Fraction
    assignment: Mapping[str, Fraction]
    multipliers: tuple[Fraction, ...] = ()
    eq_multipliers: tuple[Fraction, ...] = ()
    pivots: int = 0

    is_optimal = True


INFEASIBLE = Infeasible()
UNBOUNDED = Unbounded()


Q = mpq
QZERO = mpq(0)
QONE = mpq(1)


def _frac(x) -> Fraction:
    return Fraction(int(x.numerator), int(x.denominator))


class _Tableau:
    __slots__ = ("rows", "rhs", "basis", "obj", "zval", "pivots")

    def __init__(self, rows, rhs, basis):
        self.rows = rows
        self.rhs = rhs
        self.basis = basis
        self.obj: dict[int, Fraction] = {}
        self.zval = QZERO
        self.pivots = 0

    def pivot(self, p: int, q: int) -> None:
        row = self.rows[p]
        a = row[q]
        rhs_p = self.rhs[p]
        if a != 1:
            inv = QONE / a
            row = {j: v * inv for j, v in row.items()}
            rhs_p = rhs_p * inv
            self.rows[p] = row
            self.rhs[p] = rhs_p
        for i, ri in enumerate(self.rows):
            if i == p:
                continue
            f = ri.get(q)
            if f is None:
                continue
            for j, v in row.items():
                nv = ri.get(j, QZERO) - f * v
                if nv:
                    ri[j] = nv
                else:
                    ri.pop(j, None)
            if rhs_p:
                self.rhs[i] -= f * rhs_p
        f = self.obj.get(q)
        if f is not None:
            obj = self.obj
            for j, v in row.items():
                nv = obj.get(j, QZERO) - f * v
                if nv:
                    obj[j] = nv
                else:
                    obj.pop(j, None)
            self.zval += f * rhs_p
        self.basis[p] = q
        self.pivots += 1

    def run(self, n_eligible: int) -> bool:
        """Minimise the current objective; False when unbounded."""
        rows, rhs, basis = self.rows, self.rhs, self.basis
        while True:
            q = None
            for j, r in self.obj.items():
                if r < 0 and j < n_eligible and (q is None or j < q):
                    q = j
            if q is None:
                return True
            best = -1
            best_ratio = None
            for i, ri in enumerate(rows):
                a = ri.get(q)
                if a is None or a <= 0:
                    continue
                ratio = rhs[i] / a
                if best < 0 or ratio < best_ratio or (ratio == best_ratio and basis[i] < basis[best]):
                    best, best_ratio = i, ratio
            if best < 0:
                return False
            self.pivot(best, q)


def lp_solve(problem: LPProblem) -> LPResult:
    """Solve ``problem`` exactly.  Variables are free unless constrained."""
    cons = problem.constraints.constraints
    if any(c.strict for c in cons):
        raise ValueError("lp_solve accepts non-strict constraints only")

    order: dict[str, int] = {}
    for e in [c.expr for c in cons] + list(problem.equalities) + [problem.objective]:
        for v in e.coeffs:
            if v not in order:
                order[v] = len(order)

    # single-variable `-a*v <= 0` atoms become sign restrictions
    bound_of: dict[str, tuple[int, Fraction]] = {}
    ineq: list[int] = []
    for i, c in enumerate(cons):
        e = c.expr
        if e.is_constant():
            if e.const > 0:
                return INFEASIBLE
            continue
        if not e.const and len(e.coeffs) == 1:
            ((v, a),) = e.coeffs.items()
            if a < 0:
                if v not in bound_of:
                    bound_of[v] = (i, -a)
                continue
        ineq.append(i)
    eqs: list[int] = []
    for j, h in enumerate(problem.equalities):
        if h.is_constant():
            if h.const:
                return INFEASIBLE
            continue
        eqs.append(j)

    columns: dict[str, list[tuple[int, int]]] = {}
    ncol = 0
    for v in order:
        if v in bound_of:
            columns[v] = [(ncol, 1)]
            ncol += 1
        else:
            columns[v] = [(ncol, 1), (ncol + 1, -1)]
            ncol += 2
    n_struct = ncol
    m = len(ineq) + len(eqs)
    slack0 = n_struct
    art0 = n_struct + len(ineq)

    rows: list[dict[int, Fraction]] = []
    rhs: list[Fraction] = []
    basis: list[int] = []
    sigma: list[int] = []
    idcol: list[int] = []
    art_rows: list[int] = []
    n_art = 0

    def struct_row(e: LinExpr, s: int) -> dict[int, Fraction]:
        r: dict[int, Fraction] = {}
        for v, a in e.coeffs.items():
            for col, sg in columns[v]:
                r[col] = Q(a) * s * sg
        return r

    for k, i in enumerate(ineq):
        e = cons[i].expr
        b = -e.const
        s = 1 if b >= 0 else -1
        r = struct_row(e, s)
        r[slack0 + k] = Q(s)
        if s > 0:
            basis.append(slack0 + k)
            idcol.append(slack0 + k)
        else:
            col = art0 + n_art
            n_art += 1
            r[col] = QONE
            basis.append(col)
            idcol.append(col)
            art_rows.append(len(rows))
        rows.append(r)
        rhs.append(Q(b) * s)
        sigma.append(s)
    for j in eqs:
        h = problem.equalities[j]
        b = -h.const
        s = 1 if b >= 0 else -1
        r = struct_row(h, s)
        col = art0 + n_art
        n_art += 1
        r[col] = QONE
        basis.append(col)
        idcol.append(col)
        art_rows.append(len(rows))
        rows.append(r)
        rhs.append(Q(b) * s)
        sigma.append(s)

    tab = _Tableau(rows, rhs, basis)

    if art_rows:
        obj: dict[int, Fraction] = {}
        z = QZERO
        for i in art_rows:
            for j, a in rows[i].items():
                if j < art0:
                    nv = obj.get(j, QZERO) - a
                    if nv:
                        obj[j] = nv
                    else:
                        obj.pop(j, None)
            z += rhs[i]
        tab.obj = obj
        tab.zval = z
        tab.run(art0)
        if tab.zval > 0:
            return INFEASIBLE
        for i in range(m):
            if basis[i] >= art0:
                for j in sorted(rows[i]):
                    if j < art0:
                        tab.pivot(i, j)
                        break

    sense = -1 if problem.maximize else 1
    cost: dict[int, Fraction] = {}
    for v, a in problem.objective.coeffs.items():
        for col, sg in columns[v]:
            cost[col] = Q(a) * sense * sg
    obj = dict(cost)
    z = QZERO
    for i in range(m):
        cb = cost.get(basis[i])
        if cb:
            for j, a in rows[i].items():
                nv = obj.get(j, QZERO) - cb * a
                if nv:
                    obj[j] = nv
                else:
                    obj.pop(j, None)
            z += cb * rhs[i]
    tab.obj = obj
    tab.zval = z
    if not tab.run(art0):
        return UNBOUNDED

    colval = [QZERO] * n_struct
    for i in range(m):
        if basis[i] < n_struct:
            colval[basis[i]] = rhs[i]
    assignment = {}
    for v in order:
        assignment[v] = _frac(sum((colval[col] * sg for col, sg in columns[v]), QZERO))
    value = _frac(tab.zval * sense) + problem.objective.const

    r = tab.obj
    mult = [QZERO] * len(cons)
    for k, i in enumerate(ineq):
        mult[i] = sigma[k] * r.get(idcol[k], QZERO)
    for v, (i, a) in bound_of.items():
        mult[i] = r.get(columns[v][0][0], QZERO) / Q(a)
    eq_mult = [QZERO] * len(problem.equalities)
    for k, j in enumerate(eqs):
        row = len(ineq) + k
        eq_mult[j] = sigma[row] * r.get(idcol[row], QZERO)
    return Optimal(value, assignment, tuple(_frac(x) for x in mult), tuple(_frac(x) for x in eq_mult),
                   tab.pivots)


def maximize(expr: LinExpr, poly: Polyhedron, equalities: Iterable[LinExpr] = ()) -> LPResult:
    return lp_solve(LPProblem(expr, True, poly.closure(), tuple(equalities)))


def is_empty_closure(poly: Polyhedron) -> bool:
    return isinstance(maximize(LinExpr(), poly), Infeasible)


def entails(poly: Polyhedron, c: LinConstraint) -> bool:
    """``closure(poly) => c`` with ``c`` read as non-strict."""
    res = maximize(c.expr, poly)
    if isinstance(res, Infeasible):
        return True
    if isinstance(res, Unbounded):
        return False
    return res.value <= 0


_T = "__t"


def find_point(poly: Polyhedron, variables: Iterable[str] = (),
               equalities: Iterable[LinExpr] = ()) -> Optional[dict[str, Fraction]]:
    """Exact membership witness for ``poly`` (strict atoms honoured) or None."""
    eqs = tuple(equalities)
    if not poly.has_strict():
        res = lp_solve(LPProblem(LinExpr(), True, poly, eqs))
        if not isinstance(res, Optimal):
            return None
        point = dict(res.assignment)
    else:
        t = LinExpr.var(_T)
        cons = [LinConstraint(c.expr + t, False) if c.strict else c for c in poly]
        cons.append(LinConstraint(t - 1, False))
        res = lp_solve(LPProblem(t, True, Polyhedron(cons), eqs))
        if not isinstance(res, Optimal) or res.value <= 0:
            return None
        point = dict(res.assignment)
        point.pop(_T, None)
    for v in variables:
        point.setdefault(v, ZERO)
    for v in poly.variables():
        point.setdefault(v, ZERO)
    return point


def entails_exact(poly: Polyhedron, c: LinConstraint) -> bool:
    """``poly => c`` decided exactly, strict atoms included."""
    return find_point(poly & c.negate()) is None


def counterexample(poly: Polyhedron, c: LinConstraint) -> Optional[dict[str, Fraction]]:
    return find_point(poly & c.negate())
