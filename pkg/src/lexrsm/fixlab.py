"""Finite tree-shaped instances of lexicographic ranking processes.

A :class:`FiniteInstance` is a rooted tree: each node is an outcome
prefix at time ``t`` carrying the vector ``X_t`` and level ``Lv_t``; the
edge probabilities to its children give the conditional distribution of
time ``t + 1``.  Conditional expectations are then plain weighted sums
over children, and adaptedness holds by construction.

Clauses are evaluated at internal nodes only, so the truncation frontier
(time ``H - 1``) never needs an expectation.
"""
from __future__ import annotations

import json
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Callable, Iterator, Mapping, Optional, Sequence

from .linear import ZERO, ONE, frac


@dataclass
class Node:
    t: int
    prob: Fraction
    X: tuple
    Lv: int
    children: list = field(default_factory=list)
    label: str = ""

    @property
    def is_leaf(self) -> bool:
        return not self.children


@dataclass
class FiniteInstance:
    root: Node
    n: int
    horizon: int
    c: Fraction = ONE

    def nodes(self) -> Iterator[tuple[tuple, Node]]:
        stack = [((), self.root)]
        while stack:
            path, node = stack.pop()
            yield path, node
            for i in range(len(node.children) - 1, -1, -1):
                stack.append((path + (i,), node.children[i]))

    def size(self) -> int:
        return sum(1 for _ in self.nodes())

    def validate(self) -> None:
        if self.root.prob != 1:
            raise ValueError("root probability must be 1")
        for path, node in self.nodes():
            if len(node.X) != self.n:
                raise ValueError(f"node {path}: X has {len(node.X)} components, expected {self.n}")
            if not 0 <= node.Lv <= self.n:
                raise ValueError(f"node {path}: level {node.Lv} out of range")
            if node.children:
                if sum(ch.prob for ch in node.children) != 1:
                    raise ValueError(f"node {path}: child probabilities do not sum to 1")
                for ch in node.children:
                    if ch.prob <= 0:
                        raise ValueError(f"node {path}: non-positive edge probability")
                    if ch.t != node.t + 1:
                        raise ValueError(f"node {path}: child time {ch.t} after {node.t}")
                    if node.Lv == 0 and (ch.Lv != 0 or ch.X != node.X):
                        raise ValueError(f"node {path}: stopped process changes after stopping")


def cond_expect(node: Node, k: int) -> Fraction:
    """``E[X_{t+1}[k] | F_t]`` at ``node`` (dimensions are 1-indexed)."""
    if not node.children:
        raise ValueError("conditional expectation needs an internal node")
    return sum((ch.prob * ch.X[k - 1] for ch in node.children), ZERO)


def _prob_bottom(node: Node, k: int, bottom: Fraction) -> Fraction:
    return sum((ch.prob for ch in node.children if ch.X[k - 1] == bottom), ZERO)


FLAVORS = ("UN", "LW", "SC", "GLEX", "RANK")


@dataclass
class FlavorVerdict:
    failures: list = field(default_factory=list)  # (path, k, clause, detail)
    waived: list = field(default_factory=list)  # (path, k)

    @property
    def ok(self) -> bool:
        return not self.failures

    def to_json(self) -> dict:
        return {"ok": self.ok,
                "failures": [{"path": list(p), "dimension": k, "clause": c, "detail": d}
                             for p, k, c, d in self.failures],
                "waived": [{"path": list(p), "dimension": k} for p, k in self.waived]}


def check_flavor(inst: FiniteInstance, flavor: str, bottom=None, gamma=None) -> FlavorVerdict:
    """Evaluate the c-ranking condition plus the flavor's non-negativity clauses.

    ``UN`` needs ``bottom``.  With ``gamma`` the ranking clause at ``(node, k)``
    is waived when ``X[k] > bottom`` and the next value equals ``bottom``
    with conditional probability at least ``gamma``.
    """
    flavor = flavor.upper()
    if flavor not in FLAVORS:
        raise ValueError(f"unknown flavor {flavor!r}")
    if flavor == "UN":
        if bottom is None:
            raise ValueError("UN flavor needs a bottom value")
        bottom = frac(bottom)
    if gamma is not None:
        gamma = frac(gamma)
        if bottom is None:
            raise ValueError("gamma relaxation needs a bottom value")
    c = inst.c
    v = FlavorVerdict()
    for path, node in inst.nodes():
        if node.is_leaf or node.t >= inst.horizon - 1:
            continue
        L = node.Lv
        if flavor == "UN":
            for k in range(1, inst.n + 1):
                if node.X[k - 1] < bottom:
                    v.failures.append((path, k, "well-foundedness", f"{node.X[k - 1]} < {bottom}"))
        if L == 0:
            continue
        for k in range(1, L + 1):
            x = node.X[k - 1]
            e = cond_expect(node, k)
            need = x - (c if k == L else 0)
            if e > need:
                if gamma is not None and x > bottom and _prob_bottom(node, k, bottom) >= gamma:
                    v.waived.append((path, k))
                else:
                    v.failures.append((path, k, "ranking", f"E[X'] = {e} > {need}"))
        if flavor in ("LW", "GLEX"):
            for k in range(1, L + 1):
                if node.X[k - 1] < 0:
                    v.failures.append((path, k, "non-negativity", f"{node.X[k - 1]} < 0"))
        elif flavor == "SC":
            if node.X[L - 1] < 0:
                v.failures.append((path, L, "non-negativity", f"{node.X[L - 1]} < 0"))
        if flavor == "GLEX":
            for k in range(1, L + 1):
                s = sum((ch.prob * ch.X[k - 1] for ch in node.children if k > ch.Lv), ZERO)
                if s < 0:
                    v.failures.append((path, k, "expected-leftward", f"{s} < 0"))
    return v


def _map_tree(node: Node, fn: Callable[[Node], Node]) -> Node:
    new = fn(node)
    new.children = [_map_tree(ch, fn) for ch in node.children]
    return new


def eps_fix(inst: FiniteInstance, eps) -> FiniteInstance:
    """Replace every negative component and every component right of the level by ``-eps``."""
    eps = frac(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")

    def fix(node: Node) -> Node:
        X = tuple(-eps if (x < 0 or k > node.Lv) else x for k, x in enumerate(node.X, 1))
        return Node(node.t, node.prob, X, node.Lv, [], node.label)

    return FiniteInstance(_map_tree(inst.root, fix), inst.n, inst.horizon, inst.c)


class NotSCLexRSM(ValueError):
    pass


def _require_sc(inst: FiniteInstance) -> None:
    v = check_flavor(inst, "SC")
    if not v.ok:
        raise NotSCLexRSM(f"instance is not an SC-LexRSM: {v.failures[0]}")


def is_eps_fixable(inst: FiniteInstance, eps, require_sc: bool = True) -> bool:
    if require_sc:
        _require_sc(inst)
    eps = frac(eps)
    return check_flavor(eps_fix(inst, eps), "UN", bottom=-eps).ok


def is_eps_gamma_fixable(inst: FiniteInstance, eps, gamma, require_sc: bool = True) -> bool:
    if require_sc:
        _require_sc(inst)
    eps = frac(eps)
    return check_flavor(eps_fix(inst, eps), "UN", bottom=-eps, gamma=gamma).ok


# --- serialization --------------------------------------------------------

def _rat(q: Fraction) -> list[int]:
    return [q.numerator, q.denominator]


def _unrat(p) -> Fraction:
    if isinstance(p, (list, tuple)):
        return Fraction(int(p[0]), int(p[1]))
    return Fraction(p)


def node_to_json(node: Node) -> dict:
    d = {"t": node.t, "prob": _rat(node.prob), "X": [_rat(x) for x in node.X], "Lv": node.Lv}
    if node.label:
        d["label"] = node.label
    d["children"] = [node_to_json(ch) for ch in node.children]
    return d


def node_from_json(d: dict) -> Node:
    return Node(int(d["t"]), _unrat(d["prob"]), tuple(_unrat(x) for x in d["X"]), int(d["Lv"]),
                [node_from_json(ch) for ch in d.get("children", [])], d.get("label", ""))


def instance_to_json(inst: FiniteInstance) -> dict:
    return {"n": inst.n, "horizon": inst.horizon, "c": _rat(inst.c), "root": node_to_json(inst.root)}


def instance_from_json(doc: dict) -> FiniteInstance:
    inst = FiniteInstance(node_from_json(doc["root"]), int(doc["n"]), int(doc["horizon"]),
                          _unrat(doc.get("c", [1, 1])))
    inst.validate()
    return inst


def dump_instance(inst: FiniteInstance, path) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(instance_to_json(inst), fh, separators=(",", ":"))
        fh.write("\n")


def load_instance(path) -> FiniteInstance:
    with open(path, encoding="utf-8") as fh:
        return instance_from_json(json.load(fh))


# --- random instances -----------------------------------------------------

RANDOM_KINDS = ("GLEX", "SC_trivial_space", "LW")


@dataclass
class RandomInstance:
    instance: FiniteInstance
    repairs: list


def random_instance(kind: str, seed: int, depth: int = 5, n: int = 3, branching: int = 3,
                    c=1, stop_prob: float = 0.15) -> RandomInstance:
    """Sample a tree instance satisfying ``kind`` by construction.

    Values are drawn first and then the minimal clauses are repaired
    bottom-up (each repair is logged).  Deterministic per ``seed``.
    """
    if kind not in RANDOM_KINDS:
        raise ValueError(f"unknown kind {kind!r}")
    rng = random.Random(seed)
    c = frac(c)
    single = kind == "SC_trivial_space"
    repairs: list[str] = []

    def value() -> Fraction:
        return Fraction(rng.randint(-12, 12), rng.choice((1, 2, 4)))

    def probs(m: int) -> list[Fraction]:
        w = [rng.randint(1, 6) for _ in range(m)]
        s = sum(w)
        return [Fraction(x, s) for x in w]

    def grow(t: int, p: Fraction, lv_parent: Optional[int], path: tuple) -> Node:
        if lv_parent == 0 or (lv_parent is not None and rng.random() < stop_prob):
            lv = 0
        else:
            lv = rng.randint(1, n)
        node = Node(t, p, tuple(ZERO for _ in range(n)), lv)
        if t < depth - 1:
            m = 1 if single else rng.randint(1, branching)
            node.children = [grow(t + 1, q, lv, path + (i,)) for i, q in enumerate(probs(m))]
        return node

    root = grow(0, ONE, None, ())

    def set_constant(node: Node, X: tuple) -> None:
        node.X = X
        for ch in node.children:
            set_constant(ch, X)

    def fill(node: Node, path: tuple) -> None:
        for i, ch in enumerate(node.children):
            fill(ch, path + (i,))
        L = node.Lv
        if L == 0:
            return  # stopped subtrees are fixed by the ancestor that stops
        X = [value() for _ in range(n)]
        for ch in node.children:
            if ch.Lv == 0:
                set_constant(ch, tuple(value() for _ in range(n)))
        if node.children and kind == "GLEX":
            for k in range(1, L + 1):
                exiting = [ch for ch in node.children if k > ch.Lv]
                s = sum((ch.prob * ch.X[k - 1] for ch in exiting), ZERO)
                if s < 0:
                    mass = sum((ch.prob for ch in exiting), ZERO)
                    bump = -s / mass
                    for ch in exiting:
                        Y = list(ch.X)
                        Y[k - 1] += bump
                        if ch.Lv == 0:
                            set_constant(ch, tuple(Y))
                        else:
                            ch.X = tuple(Y)
                    repairs.append(f"{path} dim {k}: raised exiting children by {bump}")
        if node.children:
            for k in range(1, L + 1):
                need = cond_expect(node, k) + (c if k == L else 0)
                if X[k - 1] < need:
                    repairs.append(f"{path} dim {k}: ranking {X[k - 1]} -> {need}")
                    X[k - 1] = need
        nonneg = range(1, L + 1) if kind in ("GLEX", "LW") else (L,)
        for k in nonneg:
            if X[k - 1] < 0:
                repairs.append(f"{path} dim {k}: non-negativity {X[k - 1]} -> 0")
                X[k - 1] = ZERO
        node.X = tuple(X)

    fill(root, ())
    inst = FiniteInstance(root, n, depth, c)
    inst.validate()
    return RandomInstance(inst, repairs)


# --- instances from program runs -----------------------------------------

def unroll(lowered, eta: Mapping[str, Callable], lv: Mapping[tuple, int], start: str,
           init: Mapping[str, object], horizon: int, c=1) -> FiniteInstance:
    """Tree of all runs of a finite-branching program from ``(start, init)``.

    ``eta[loc]`` maps an exact valuation to the vector at ``loc``; ``lv``
    maps ``(source, first target)`` of each transition to its level.
    Parametrized branch probabilities are evaluated exactly.  Only
    deterministic updates are supported.
    """
    from .frontend.ast import eval_arith
    from .pcfg import DetLinear

    pcfg = lowered.pcfg
    n = len(next(iter(eta.values()))({v: ZERO for v in pcfg.variables}))

    def enabled(loc: str, s: dict):
        ts = [t for t in pcfg.outgoing(loc) if t.guard.holds(s)]
        if len(ts) != 1:
            raise ValueError(f"{len(ts)} transitions enabled at {loc} for {s}")
        return ts[0]

    def build(loc: str, s: dict, t: int, p: Fraction) -> Node:
        X = tuple(frac(x) for x in eta[loc](s))
        tr = enabled(loc, s)
        level = 0 if tr.id == pcfg.tau_out else lv[(tr.source, tr.branches[0][1])]
        node = Node(t, p, X, level, label=loc)
        if t >= horizon - 1:
            return node
        if tr.update is None:
            s2 = dict(s)
        else:
            var, upd = tr.update
            if not isinstance(upd, DetLinear):
                raise ValueError("unrolling supports deterministic updates only")
            s2 = dict(s)
            s2[var] = upd.f.evaluate(s)
        if tr.id in lowered.prob_exprs:
            q = eval_arith(lowered.prob_exprs[tr.id], s)
            branches = [(q, tr.branches[0][1]), (1 - q, tr.branches[1][1])]
        else:
            branches = list(tr.branches)
        node.children = [build(tgt, s2, t + 1, q) for q, tgt in branches if q > 0]
        return node

    inst = FiniteInstance(build(start, {k: frac(v) for k, v in init.items()}, 0, ONE),
                          n, horizon, frac(c))
    inst.validate()
    return inst


FIG3_PROGRAM = """x := 0; t := 1;
while x = 0 do
  t := t + 1;
  if prob(2^(-t)) then x := 1 fi
od
"""

FIG4_PROGRAM = """x := 0; t := 1;
while x = 0 do
  if prob(1/2) then t := 4*t else x := 1 fi
od
"""


def _lowered(text: str):
    from .frontend import lower_full, parse

    return lower_full(parse(text, permissive=True))


def fig3_instance(horizon: int = 8) -> FiniteInstance:
    """Runs of the vanishing-exit loop from its head, with its leftward non-negative map."""
    eta = {
        "l1": lambda s: (2 - s["x"], 0, 2),
        "l2": lambda s: (2, 0, 1),
        "l3": lambda s: (2, 0, 0),
        "l4": lambda s: (2, -Fraction(2) ** int(s["t"]), 0),
        "l5": lambda s: (0, 0, 0),
    }
    lv = {("l1", "l2"): 3, ("l2", "l3"): 3, ("l3", "l4"): 2, ("l4", "l1"): 1, ("l1", "l5"): 1}
    return unroll(_lowered(FIG3_PROGRAM), eta, lv, "l1", {"x": 0, "t": 1}, horizon)


def fig4_instance(horizon: int = 8) -> FiniteInstance:
    """Runs of the fair-coin loop with the unbounded-negativity map."""
    eta = {
        "l1": lambda s: (2 - s["x"], s["t"] + 1),
        "l2": lambda s: (2, s["t"]),
        "l3": lambda s: (2, 4 * s["t"] + 2),
        "l4": lambda s: (2, -2 * s["t"] - 4),
        "l5": lambda s: (0, 0),
    }
    lv = {("l1", "l2"): 2, ("l2", "l3"): 2, ("l3", "l1"): 2, ("l4", "l1"): 1, ("l1", "l5"): 1}
    return unroll(_lowered(FIG4_PROGRAM), eta, lv, "l1", {"x": 0, "t": 1}, horizon)


def fig3_refutation_horizon(eps) -> int:
    """Smallest horizon whose internal nodes include a failing vanishing-exit node.

    The exit node visited with counter value ``j`` sits at depth ``3j - 4``
    and breaks the fixed ranking condition once ``2^j > eps``.
    """
    eps = frac(eps)
    j = 2
    while Fraction(2) ** j <= eps:
        j += 1
    return 3 * j - 2
