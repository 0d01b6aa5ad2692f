from fractions import Fraction as F

import numpy as np
import pytest

from lexrsm.frontend import lower_full, parse
from lexrsm.linear import LinExpr, Polyhedron, ge
from lexrsm.pcfg import PCFG, Transition
from lexrsm.simulator import (DeadlockReached, FirstEnabled, PolicyTable, Terminated, Timeout, UniformRandom,
                              estimate_termination, parse_scheduler, run_once)
from conftest import CORPUS, program_text


def low(text, permissive=False):
    return lower_full(parse(text, permissive))


def test_loop_never_entered():
    res = run_once(low("x := 1; while x < 0 do skip od"))
    assert isinstance(res, Terminated) and res.step <= 3


def test_infinite_loop_times_out():
    assert run_once(low("while true do skip od"), max_steps=50) == Timeout(50)


def test_fig4_loop_count_is_geometric():
    m = low(program_text("fig4.pp"))
    steps = np.array([run_once(m, seed=s).step for s in range(4000)])
    base = steps.min()
    per = np.diff(np.unique(steps)).min()
    iters = (steps - base) // per + 1
    assert set(((steps - base) % per).tolist()) == {0}
    for k in (1, 2, 3):
        frac = (iters > k).mean()
        assert abs(frac - 2.0 ** -k) < 4 * np.sqrt(2.0 ** -k / 4000)


@pytest.mark.parametrize("src", [
    "x := 0; if x >= 0 then skip else while true do skip od fi",
    "x := 0; if x < 0 then while true do skip od else skip fi",
])
def test_boundary_value_enables_exactly_one_branch(src):
    assert isinstance(run_once(low(src), max_steps=100), Terminated)


def test_deadlock_reported():
    x = LinExpr.var("x")
    g = PCFG(("x",), ("a", "b"), (Transition("t1", "a", ((F(1), "b"),), None, Polyhedron([ge(x, 1)]), 0),
                                  Transition("t_out", "b", ((F(1), "b"),), None, Polyhedron(), 1)), "a", "b")
    with pytest.raises(DeadlockReached):
        run_once(g, init={"x": 0})
    stats = estimate_termination(g, init={"x": 0}, n_runs=10)
    assert stats.n_deadlock == 10 and stats.n_terminated == 0


def test_same_seed_same_stats():
    m = low(program_text("fig4.pp"))
    a = estimate_termination(m, n_runs=2000, seed=7)
    b = estimate_termination(m, n_runs=2000, seed=7)
    c = estimate_termination(m, n_runs=2000, seed=8)
    assert a == b
    assert a.mean_steps != c.mean_steps


def test_stats_invariants():
    m = low(program_text("fig3.pp"), permissive=True)
    s = estimate_termination(m, n_runs=5000, max_steps=500)
    assert s.n_terminated + s.n_timeout + s.n_deadlock == s.n_runs
    assert 0 <= s.ci_low <= s.frequency <= s.ci_high <= 1
    assert "refute" in s.report()


@pytest.mark.parametrize("name", ["countUp.pp", "cousot9.pp", "speedDis1.pp"])
def test_first_enabled_is_deterministic_without_randomness(name):
    m = lower_full(parse((CORPUS / name).read_text()))
    init = {v: 3 for v in m.pcfg.variables}
    runs = {run_once(m, FirstEnabled(), init, max_steps=100_000, seed=s) for s in range(5)}
    assert len(runs) == 1


def test_policy_table_and_parsing():
    m = low("x := 0; while x < 10 do x := x + ndet(1, 3) od")
    lo = run_once(m, PolicyTable(ndet={t.id: "lo" for t in m.pcfg.transitions}))
    hi = run_once(m, PolicyTable(ndet={t.id: "hi" for t in m.pcfg.transitions}))
    assert lo.step > hi.step
    assert parse_scheduler("uniform:4") == UniformRandom(4)
    assert parse_scheduler("first") == FirstEnabled()
    assert parse_scheduler('policy:{"ndet": {"t3": "hi"}}') == PolicyTable({}, {"t3": "hi"})
    with pytest.raises(ValueError):
        parse_scheduler("bogus")


def test_certified_corpus_programs_always_terminate():
    for name in ("countUp_pa.pp", "driftWalk.pp", "cousot9_pl.pp"):
        m = lower_full(parse((CORPUS / name).read_text()))
        init = {v: 2 for v in m.pcfg.variables}
        s = estimate_termination(m, init=init, n_runs=500, max_steps=1_000_000)
        assert s.n_terminated == 500, name
