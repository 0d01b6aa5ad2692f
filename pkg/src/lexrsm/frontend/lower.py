"""Lowering of programs to pCFGs and invariant attachment.

Every statement gets its own location, numbered in program (pre-)order.
Leading simple statements form an initialization prefix whose locations
are ``l0, l0_1, l0_2, ...``; the remaining control points are ``l1, l2,
...`` and the terminal location takes the next free number.  Branch
targets point straight at the continuation, so ``fi`` and ``od`` do not
introduce locations of their own.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Optional

from ..linear import LinConstraint, LinExpr, Polyhedron, ONE
from ..pcfg import (PCFG, TAU_OUT, DetLinear, ModelError, Ndet, Sample, Transition)
from .ast import (And, Arith, Assign, BConst, Cmp, If, NdetRange, Not, Or, Prob, Program,
                  Skip, Star, While)
from .parser import ParseError


# --- boolean normal forms -------------------------------------------------

def _atoms(c: Cmp) -> list[list[LinConstraint]]:
    """DNF of a single comparison as a list of conjunctions."""
    d = c.left - c.right
    if c.op == "<=":
        return [[LinConstraint(d, False)]]
    if c.op == "<":
        return [[LinConstraint(d, True)]]
    if c.op == ">=":
        return [[LinConstraint(-d, False)]]
    if c.op == ">":
        return [[LinConstraint(-d, True)]]
    if c.op == "=":
        return [[LinConstraint(d, False), LinConstraint(-d, False)]]
    return [[LinConstraint(d, True)], [LinConstraint(-d, True)]]


def _negate_cmp(c: Cmp) -> Cmp:
    flip = {"<": ">=", "<=": ">", ">": "<=", ">=": "<", "=": "!=", "!=": "="}
    return Cmp(flip[c.op], c.left, c.right)


def dnf(b, negate: bool = False) -> list[list[LinConstraint]]:
    """Disjunctive normal form; negated conjunctions become pairwise-disjoint disjuncts."""
    if isinstance(b, BConst):
        return [[]] if b.value != negate else []
    if isinstance(b, Cmp):
        return _atoms(_negate_cmp(b) if negate else b)
    if isinstance(b, Not):
        return dnf(b.arg, not negate)
    if isinstance(b, And) and negate or isinstance(b, Or) and not negate:
        if isinstance(b, And):
            # not(a1 and a2 and ...) = not a1 or (a1 and not a2) or ...
            out = []
            prefix: list[list[LinConstraint]] = [[]]
            for a in b.args:
                for p in prefix:
                    for q in dnf(a, True):
                        out.append(p + q)
                prefix = [p + q for p in prefix for q in dnf(a, False)]
            return _simplify(out)
        return _simplify([d for a in b.args for d in dnf(a, False)])
    args = b.args
    out = [[]]
    for a in args:
        out = [p + q for p in out for q in dnf(a, negate)]
    return _simplify(out)


def _simplify(disjuncts):
    out = []
    for d in disjuncts:
        if any(c.is_trivially_false() for c in d):
            continue
        seen = []
        for c in d:
            if not c.is_trivially_true() and c not in seen:
                seen.append(c)
        if seen not in out:
            out.append(seen)
    return out


def conjunction(b) -> Polyhedron:
    """Polyhedron of a purely conjunctive condition."""
    ds = dnf(b)
    if not ds:
        return Polyhedron([LinConstraint(LinExpr.constant(1))])
    if len(ds) > 1:
        raise ParseError("disjunctive invariants are not supported")
    return Polyhedron(ds[0])


# --- lowering -------------------------------------------------------------

@dataclass
class Lowered:
    pcfg: PCFG
    loop_invariants: dict = field(default_factory=dict)  # location -> Polyhedron
    prob_exprs: dict = field(default_factory=dict)  # transition id -> Arith


class _Lowerer:
    def __init__(self, program: Program):
        self.program = program
        self.labels: dict[tuple, str] = {}
        self.locations: list[str] = []
        self.transitions: list[Transition] = []
        self.loop_inv: dict[str, Polyhedron] = {}
        self.prob_exprs: dict[str, Arith] = {}

    def number(self) -> str:
        body = self.program.body
        k = 0
        while k < len(body) and isinstance(body[k], (Assign, Skip)):
            name = "l0" if k == 0 else f"l0_{k}"
            self.labels[(k,)] = name
            self.locations.append(name)
            k += 1
        counter = [0]

        def visit(stmts, path, start=0):
            for i in range(start, len(stmts)):
                s, p = stmts[i], path + (i,)
                counter[0] += 1
                name = f"l{counter[0]}"
                self.labels[p] = name
                self.locations.append(name)
                if isinstance(s, If):
                    visit(s.then, p + ("then",))
                    visit(s.orelse, p + ("else",))
                elif isinstance(s, While):
                    visit(s.body, p + ("body",))

        visit(body, (), k)
        out = f"l{counter[0] + 1}"
        self.locations.append(out)
        return out

    def emit(self, source, branches, update=None, guard=()):
        tid = f"t{len(self.transitions) + 1}"
        self.transitions.append(Transition(tid, source, tuple(branches), update,
                                           Polyhedron(guard), len(self.transitions)))
        return tid

    def block(self, stmts, cont: str, path: tuple):
        for i, s in enumerate(stmts):
            nxt = self.labels[path + (i + 1,)] if i + 1 < len(stmts) else cont
            self.stmt(s, nxt, path + (i,))

    def entry(self, stmts, cont: str, path: tuple) -> str:
        return self.labels[path + (0,)] if stmts else cont

    def stmt(self, s, cont: str, path: tuple):
        here = self.labels[path]
        if isinstance(s, Skip):
            self.emit(here, [(ONE, cont)])
        elif isinstance(s, Assign):
            if s.rand is None:
                upd = DetLinear(s.expr)
            elif isinstance(s.rand, NdetRange):
                upd = Ndet(s.rand.lo, s.rand.hi, s.expr)
            else:
                upd = Sample(s.rand, s.expr)
            self.emit(here, [(ONE, cont)], (s.var, upd))
        elif isinstance(s, If):
            tp, ep = path + ("then",), path + ("else",)
            self.branch(here, s.cond, self.entry(s.then, cont, tp), self.entry(s.orelse, cont, ep))
            self.block(s.then, cont, tp)
            self.block(s.orelse, cont, ep)
        else:
            bp = path + ("body",)
            if s.invariant is not None:
                self.loop_inv[here] = conjunction(s.invariant)
            self.branch(here, s.cond, self.entry(s.body, here, bp), cont)
            self.block(s.body, here, bp)

    def branch(self, here, cond, yes, no):
        if isinstance(cond, Star):
            self.emit(here, [(ONE, yes)])
            self.emit(here, [(ONE, no)])
        elif isinstance(cond, Prob):
            if cond.p is None:
                tid = self.emit(here, [(Fraction(1, 2), yes), (Fraction(1, 2), no)])
                self.prob_exprs[tid] = cond.expr
            elif cond.p == 1:
                self.emit(here, [(ONE, yes)])
            elif cond.p == 0:
                self.emit(here, [(ONE, no)])
            else:
                self.emit(here, [(cond.p, yes), (1 - cond.p, no)])
        else:
            for conj in dnf(cond):
                self.emit(here, [(ONE, yes)], guard=conj)
            for conj in dnf(cond, negate=True):
                self.emit(here, [(ONE, no)], guard=conj)

    def run(self) -> Lowered:
        out = self.number()
        self.block(self.program.body, out, ())
        self.transitions.append(Transition(TAU_OUT, out, ((ONE, out),), None, Polyhedron(),
                                           len(self.transitions)))
        l_in = self.locations[0]
        pcfg = PCFG(self.program.variables(), tuple(self.locations), tuple(self.transitions),
                    l_in, out, TAU_OUT)
        return Lowered(pcfg, self.loop_inv, self.prob_exprs)


def lower_full(program: Program) -> Lowered:
    return _Lowerer(program).run()


def lower(program: Program) -> PCFG:
    """Lower a program with constant probabilities to a pCFG."""
    low = lower_full(program)
    if low.prob_exprs:
        raise ModelError("parametrized probabilities are only supported by the simulator")
    return low.pcfg


# --- invariants -----------------------------------------------------------

class UnknownLocation(ValueError):
    pass


def _touched(t: Transition) -> set[str]:
    return {t.update[0]} if t.update is not None else set()


def guard_facts(pcfg: PCFG) -> dict[str, Polyhedron]:
    """Guard atoms every entering transition establishes and leaves untouched."""
    facts: dict[str, Polyhedron] = {}
    for loc in pcfg.locations:
        if loc == pcfg.l_in:
            facts[loc] = Polyhedron()
            continue
        common: Optional[list[LinConstraint]] = None
        for t in pcfg.incoming(loc):
            if t.id == pcfg.tau_out:
                continue
            kept = [a for a in t.guard if not (a.variables() & _touched(t))]
            common = kept if common is None else [a for a in common if a in kept]
        facts[loc] = Polyhedron(common or ())
    return facts


def attach_invariants(pcfg: PCFG, annotations: Mapping[str, object] | None = None,
                      loop_invariants: Mapping[str, Polyhedron] | None = None) -> dict[str, Polyhedron]:
    """Per-location invariants from annotations and guard propagation.

    ``annotations`` maps labels to conditions (as parsed from a ``.inv`` file)
    or to polyhedra.  The initial location always gets ``true``.
    """
    inv: dict[str, Polyhedron] = {}
    facts = guard_facts(pcfg)
    ann: dict[str, Polyhedron] = {}
    for label, cond in (annotations or {}).items():
        if label not in pcfg.locations:
            raise UnknownLocation(f"unknown location label {label!r}")
        poly = cond if isinstance(cond, Polyhedron) else conjunction(cond)
        unknown = poly.variables() - set(pcfg.variables)
        if unknown:
            raise UnknownLocation(f"annotation at {label} mentions unknown variables {sorted(unknown)}")
        ann[label] = poly
    for loc in pcfg.locations:
        if loc == pcfg.l_in:
            inv[loc] = Polyhedron()
            continue
        parts = Polyhedron()
        if loop_invariants and loc in loop_invariants:
            parts = parts & loop_invariants[loc]
        if loc in ann:
            parts = parts & ann[loc]
        inv[loc] = (parts & facts[loc]).dedup()
    return inv
