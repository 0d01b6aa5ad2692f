"""Monte-Carlo interpreter for pCFGs.

Each program is translated to Python source, compiled once with numba,
and run with a counter-based random stream (splitmix64 over the master
seed, run index and draw counter), so a run's outcome depends only on
``(seed, run index)``.  States are 64-bit floats; guards on boundary
values are therefore approximate.  This is the only floating-point
component of the package.

Simulation can refute almost-sure termination under the schedulers it
runs; it never establishes it.
"""
from __future__ import annotations

import json
import math
from dataclasses import asdict, dataclass, field
from typing import Mapping, Optional, Union

import numba
import numpy as np
from scipy.stats import binomtest

from .frontend.ast import BinOp, Neg, Num, Var
from .frontend.lower import Lowered
from .linear import LinExpr, Polyhedron
from .pcfg import PCFG, DetLinear, DiracConst, Ndet, Normal, Sample, Uniform

DISCLAIMER = ("simulation can only refute almost-sure termination under the schedulers run; "
              "it never proves it")

TERMINATED, TIMEOUT, DEADLOCK = 1, 0, 2


# --- random stream ------------------------------------------------------

_GAMMA = np.uint64(0x9E3779B97F4A7C15)


@numba.njit(cache=False)
def _mix64(z):
    z = (z ^ (z >> np.uint64(30))) * np.uint64(0xBF58476D1CE4E5B9)
    z = (z ^ (z >> np.uint64(27))) * np.uint64(0x94D049BB133111EB)
    return z ^ (z >> np.uint64(31))


@numba.njit(cache=False)
def _run_key(seed, run):
    return _mix64(np.uint64(seed) ^ _mix64((np.uint64(run) + np.uint64(1)) * _GAMMA))


@numba.njit(cache=False)
def _uniform01(key, ctr):
    z = _mix64(key + np.uint64(ctr) * _GAMMA)
    return float(z >> np.uint64(11)) * (1.0 / 9007199254740992.0)


# --- schedulers ---------------------------------------------------------

@dataclass(frozen=True)
class UniformRandom:
    """Picks uniformly among enabled transitions and uniformly in nondeterministic ranges."""

    seed: int = 0


@dataclass(frozen=True)
class FirstEnabled:
    """Takes the enabled transition that comes first; nondeterministic updates take the lower end."""


@dataclass(frozen=True)
class PolicyTable:
    """Fixed choices: ``transitions`` maps a location to a preferred transition id
    (falling back to the first enabled one), ``ndet`` maps a transition id to ``"lo"`` or ``"hi"``."""

    transitions: Mapping[str, str] = field(default_factory=dict)
    ndet: Mapping[str, str] = field(default_factory=dict)


Scheduler = Union[UniformRandom, FirstEnabled, PolicyTable]


def parse_scheduler(text: str) -> Scheduler:
    """``uniform[:seed]``, ``first`` or ``policy:<json>``."""
    kind, _, arg = text.partition(":")
    if kind == "uniform":
        return UniformRandom(int(arg) if arg else 0)
    if kind == "first":
        return FirstEnabled()
    if kind == "policy":
        doc = json.loads(arg) if arg else {}
        return PolicyTable(doc.get("transitions", {}), doc.get("ndet", {}))
    raise ValueError(f"unknown scheduler {text!r}")


# --- code generation ----------------------------------------------------

def _f(q) -> str:
    return repr(float(q))


class _Gen:
    def __init__(self, pcfg: PCFG, prob_exprs: Mapping[str, object]):
        self.pcfg = pcfg
        self.prob_exprs = prob_exprs
        self.var_ix = {v: i for i, v in enumerate(pcfg.variables)}
        self.loc_ix = {l: i for i, l in enumerate(pcfg.locations)}

    def lin(self, e: LinExpr) -> str:
        parts = [_f(e.const)]
        parts += [f"{_f(c)} * s[{self.var_ix[v]}]" for v, c in sorted(e.coeffs.items())]
        return "(" + " + ".join(parts) + ")"

    def arith(self, a) -> str:
        if isinstance(a, Num):
            return _f(a.value)
        if isinstance(a, Var):
            return f"s[{self.var_ix[a.name]}]"
        if isinstance(a, Neg):
            return f"(-{self.arith(a.arg)})"
        op = "**" if a.op == "^" else a.op
        return f"({self.arith(a.left)} {op} {self.arith(a.right)})"

    def guard(self, g: Polyhedron) -> str:
        if not g.constraints:
            return "True"
        return " and ".join(f"{self.lin(c.expr)} {'<' if c.strict else '<='} 0.0"
                            for c in g.constraints)

    def draw(self, dist) -> list[str]:
        if isinstance(dist, DiracConst):
            return [f"r = {_f(dist.value)}"]
        if isinstance(dist, Uniform):
            return ["r = " + f"{_f(dist.lo)} + ({_f(dist.hi - dist.lo)}) * _uniform01(key, ctr)",
                    "ctr += 1"]
        assert isinstance(dist, Normal)
        return ["u1 = 1.0 - _uniform01(key, ctr)",
                "u2 = _uniform01(key, ctr + 1)",
                "ctr += 2",
                f"r = {_f(dist.mu)} + {_f(dist.sigma)} * math.sqrt(-2.0 * math.log(u1)) * math.cos(2.0 * math.pi * u2)"]

    def source(self) -> str:
        p = self.pcfg
        L = [
            "def _run(seed, run, init, max_steps, sched, pol_t, pol_nd):",
            "    key = _run_key(seed, run)",
            "    ctr = 0",
            "    s = init.copy()",
            f"    loc = {self.loc_ix[p.l_in]}",
            f"    en = np.empty({max(len(p.transitions), 1)}, np.int64)",
            "    for step in range(max_steps + 1):",
            f"        if loc == {self.loc_ix[p.l_out]}:",
            "            return 1, step",
            "        if step == max_steps:",
            "            return 0, step",
            "        n_en = 0",
        ]
        for loc in p.locations:
            if loc == p.l_out:
                continue
            L.append(f"        if loc == {self.loc_ix[loc]}:")
            outs = [(i, t) for i, t in enumerate(p.transitions) if t.source == loc]
            for i, t in outs:
                L.append(f"            if {self.guard(t.guard)}:")
                L.append(f"                en[n_en] = {i}")
                L.append("                n_en += 1")
            if not outs:
                L.append("            pass")
        L += [
            "        if n_en == 0:",
            "            return 2, step",
            "        tid = en[0]",
            "        if sched == 0 and n_en > 1:",
            "            k = int(_uniform01(key, ctr) * n_en)",
            "            ctr += 1",
            "            tid = en[min(k, n_en - 1)]",
            "        elif sched == 2 and pol_t[loc] >= 0:",
            "            for j in range(n_en):",
            "                if en[j] == pol_t[loc]:",
            "                    tid = en[j]",
        ]
        first = True
        for i, t in enumerate(p.transitions):
            if t.id == p.tau_out:
                continue
            L.append(f"        {'if' if first else 'elif'} tid == {i}:")
            first = False
            body = []
            if t.id in self.prob_exprs:
                body.append(f"pr = {self.arith(self.prob_exprs[t.id])}")
                probs = None
            else:
                probs = [q for q, _ in t.branches]
            if t.update is not None:
                var, u = t.update
                ix = self.var_ix[var]
                if isinstance(u, DetLinear):
                    body.append(f"nv = {self.lin(u.f)}")
                elif isinstance(u, Sample):
                    body += self.draw(u.dist)
                    body.append(f"nv = {self.lin(u.base)} + r")
                else:
                    assert isinstance(u, Ndet)
                    lo, hi = _f(u.lo), _f(u.hi)
                    body += [
                        f"if sched == 0:",
                        f"    r = {lo} + ({_f(u.hi - u.lo)}) * _uniform01(key, ctr)",
                        f"    ctr += 1",
                        f"elif sched == 2 and pol_nd[{i}] == 1:",
                        f"    r = {hi}",
                        f"else:",
                        f"    r = {lo}",
                        f"nv = {self.lin(u.base)} + r",
                    ]
                body.append(f"s[{ix}] = nv")
            targets = [self.loc_ix[tgt] for _, tgt in t.branches]
            if len(targets) == 1:
                body.append(f"loc = {targets[0]}")
            else:
                body += ["b = _uniform01(key, ctr)", "ctr += 1"]
                if probs is None:
                    body += ["if b < pr:", f"    loc = {targets[0]}", "else:", f"    loc = {targets[1]}"]
                else:
                    acc = 0
                    for j, (q, tgt) in enumerate(zip(probs, targets)):
                        acc += q
                        kw = "if" if j == 0 else "elif"
                        if j == len(targets) - 1:
                            body += ["else:", f"    loc = {tgt}"]
                        else:
                            body += [f"{kw} b < {_f(acc)}:", f"    loc = {tgt}"]
            L += ["            " + line for line in body]
        L.append("    return 0, max_steps")
        return "\n".join(L) + "\n"


def _batch(run_one):
    @numba.njit(cache=False)
    def batch(seed, first, n, init, max_steps, sched, pol_t, pol_nd):
        status = np.empty(n, np.int8)
        steps = np.empty(n, np.int64)
        for r in range(n):
            st, k = run_one(seed, first + r, init, max_steps, sched, pol_t, pol_nd)
            status[r] = st
            steps[r] = k
        return status, steps

    return batch


@dataclass
class CompiledProgram:
    pcfg: PCFG
    source: str
    run_one: object
    batch: object

    def encode_scheduler(self, sched: Scheduler):
        p = self.pcfg
        pol_t = np.full(len(p.locations), -1, np.int64)
        pol_nd = np.full(len(p.transitions), -1, np.int64)
        if isinstance(sched, UniformRandom):
            return 0, int(sched.seed), pol_t, pol_nd
        if isinstance(sched, FirstEnabled):
            return 1, 0, pol_t, pol_nd
        ids = {t.id: i for i, t in enumerate(p.transitions)}
        for loc, tid in sched.transitions.items():
            if loc not in p.locations or tid not in ids:
                raise ValueError(f"policy entry {loc} -> {tid} does not name a transition")
            if p.transitions[ids[tid]].source != loc:
                raise ValueError(f"transition {tid} does not leave {loc}")
            pol_t[p.locations.index(loc)] = ids[tid]
        for tid, side in sched.ndet.items():
            if side not in ("lo", "hi"):
                raise ValueError(f"ndet choice must be lo or hi, got {side!r}")
            pol_nd[ids[tid]] = 1 if side == "hi" else 0
        return 2, 0, pol_t, pol_nd

    def init_vector(self, init: Optional[Mapping[str, float]]) -> np.ndarray:
        init = dict(init or {})
        unknown = set(init) - set(self.pcfg.variables)
        if unknown:
            raise ValueError(f"unknown variables in initial valuation: {sorted(unknown)}")
        return np.array([float(init.get(v, 0.0)) for v in self.pcfg.variables], dtype=np.float64)


_CACHE: dict[str, CompiledProgram] = {}


def compile_program(model: Union[PCFG, Lowered]) -> CompiledProgram:
    if isinstance(model, Lowered):
        pcfg, prob_exprs = model.pcfg, model.prob_exprs
    else:
        pcfg, prob_exprs = model, {}
    gen = _Gen(pcfg, prob_exprs)
    src = gen.source()
    hit = _CACHE.get(src)
    if hit is not None and hit.pcfg == pcfg:
        return hit
    ns = {"np": np, "math": math, "_run_key": _run_key, "_uniform01": _uniform01}
    exec(compile(src, "<pcfg-simulator>", "exec"), ns)
    run_one = numba.njit(cache=False)(ns["_run"])
    prog = CompiledProgram(pcfg, src, run_one, _batch(run_one))
    _CACHE[src] = prog
    return prog


# --- results ------------------------------------------------------------

@dataclass(frozen=True)
class Terminated:
    step: int


@dataclass(frozen=True)
class Timeout:
    max_steps: int


class DeadlockReached(RuntimeError):
    def __init__(self, step: int):
        super().__init__(f"no transition enabled after {step} steps")
        self.step = step


def run_once(model, scheduler: Scheduler = FirstEnabled(), init=None, max_steps: int = 10_000,
             seed: int = 0):
    prog = compile_program(model)
    kind, sseed, pol_t, pol_nd = prog.encode_scheduler(scheduler)
    st, k = prog.run_one(np.uint64(seed ^ sseed), 0, prog.init_vector(init), max_steps, kind,
                         pol_t, pol_nd)
    if st == TERMINATED:
        return Terminated(int(k))
    if st == DEADLOCK:
        raise DeadlockReached(int(k))
    return Timeout(max_steps)


@dataclass
class RunStats:
    n_runs: int
    n_terminated: int
    n_timeout: int
    n_deadlock: int
    mean_steps: Optional[float]
    max_steps: int
    ci_low: float
    ci_high: float
    note: str = DISCLAIMER

    @property
    def frequency(self) -> float:
        return self.n_terminated / self.n_runs

    def to_json(self) -> dict:
        d = asdict(self)
        d["frequency"] = self.frequency
        return d

    def report(self) -> str:
        lines = [f"runs: {self.n_runs}, terminated: {self.n_terminated}, timeouts: {self.n_timeout}, "
                 f"deadlocks: {self.n_deadlock}",
                 f"termination frequency: {self.frequency:.6f} "
                 f"(Wilson 95%: [{self.ci_low:.6f}, {self.ci_high:.6f}])"]
        if self.mean_steps is not None:
            lines.append(f"mean steps to termination: {self.mean_steps:.2f} (cap {self.max_steps})")
        lines.append(f"note: {self.note}")
        return "\n".join(lines)


def estimate_termination(model, scheduler: Scheduler = UniformRandom(), init=None,
                         n_runs: int = 10_000, max_steps: int = 10_000, seed: int = 0) -> RunStats:
    """Run ``n_runs`` independent simulations; deterministic per ``seed``."""
    if n_runs < 1:
        raise ValueError("n_runs must be positive")
    prog = compile_program(model)
    kind, sseed, pol_t, pol_nd = prog.encode_scheduler(scheduler)
    status, steps = prog.batch(np.uint64(seed ^ sseed), 0, n_runs, prog.init_vector(init),
                               max_steps, kind, pol_t, pol_nd)
    term = status == TERMINATED
    n_term = int(term.sum())
    ci = binomtest(n_term, n_runs).proportion_ci(confidence_level=0.95, method="wilson")
    return RunStats(n_runs, n_term, int((status == TIMEOUT).sum()), int((status == DEADLOCK).sum()),
                    float(steps[term].mean()) if n_term else None, max_steps,
                    float(ci.low), float(ci.high))
