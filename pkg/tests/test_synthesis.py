import itertools
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from lexrsm import bench
from lexrsm.checker import Flavor, check_certificate
from lexrsm.frontend import attach_invariants, lower, lower_full, parse, parse_annotations
from lexrsm.invariants import infer_invariants
from lexrsm.linear import LinExpr, Polyhedron
from lexrsm.pcfg import PCFG, DetLinear, Transition
from lexrsm.synthesis import (NONNEG, STRICT, NoProgress, Strategy, _Problem, _unranked_group,
                              attempt_nonneg_dimension, attempt_strict_dimension, class_enumerate,
                              matching_flavor, synthesize)
from conftest import CORPUS, program_text


def test_class_enumerate_orders():
    assert class_enumerate(Strategy.SMC, ["b", "a"]) == [("a",), ("b",)]
    assert class_enumerate(Strategy.EMC, ["a", "b"]) == [("a", "b"), ("a",), ("b",)]
    assert class_enumerate(Strategy.LWN, ["a", "b"]) == []
    assert class_enumerate(Strategy.STR, ["a"]) == []


@given(st.lists(st.sampled_from([f"t{i}" for i in range(1, 7)]), min_size=1, max_size=6, unique=True))
def test_emc_enumerates_every_subset_by_size(U):
    cands = class_enumerate(Strategy.EMC, U)
    assert len(cands) == 2 ** len(U) - 1
    assert [len(c) for c in cands] == sorted((len(c) for c in cands), reverse=True)
    assert {frozenset(c) for c in cands} == {frozenset(s) for r in range(1, len(U) + 1)
                                            for s in itertools.combinations(U, r)}


def test_fig2_smc(fig2):
    g, inv = fig2
    cert = synthesize(g, inv, Strategy.SMC)
    assert cert and cert.dimension <= 4
    assert check_certificate(g, inv, cert.eta, cert.lv, Flavor.SC_MCLC).ok
    assert set(cert.lv) == {t.id for t in g.transitions}
    assert sorted(t for ts in cert.ranked.values() for t in ts) == sorted(t.id for t in g.ranked_transitions)


def test_fig2_lwn_fails(fig2):
    g, inv = fig2
    res = synthesize(g, inv, Strategy.LWN)
    assert not res and res.reason == "no-progress" and res.unranked


def test_fig2_strict_dimension_for_outer_counter(fig2):
    g, inv = fig2
    prob = _Problem(g, inv, 1)
    U = [t.id for t in g.ranked_transitions]
    eta = attempt_strict_dimension(prob, U, ["t3", "t5", "t7"], 1)
    assert eta is not None
    # the loop head component is a decreasing function of x
    assert eta["l1"].coeff("x") < 0 and eta["l1"].coeff("y") == 0


def test_fig2_without_sampling_is_single_nonneg_component():
    src = program_text("fig2.pp").replace("sample(unif(1, 2))", "1")
    g = lower(parse(src))
    inv = attach_invariants(g, parse_annotations(program_text("fig2.inv")))
    cert = synthesize(g, inv, Strategy.SMC)
    assert cert
    assert check_certificate(g, inv, cert.eta, cert.lv, Flavor.SC_MCLC).ok


@pytest.mark.parametrize("s", list(Strategy))
def test_straight_line_one_dimension(s):
    g = lower(parse("x := 0"))
    cert = synthesize(g, {}, s)
    assert cert.dimension == 1 and cert.branch == {1: NONNEG}


def test_increasing_self_loop_makes_no_progress():
    x = LinExpr.var("x")
    g = PCFG(("x",), ("a", "b"), (Transition("t1", "a", ((F(1), "a"),), ("x", DetLinear(x + 1)), Polyhedron(), 0),
                                  Transition("t2", "a", ((F(1), "b"),), None, Polyhedron(), 1),
                                  Transition("t_out", "b", ((F(1), "b"),), None, Polyhedron(), 2)), "a", "b")
    with pytest.raises(NoProgress):
        attempt_nonneg_dimension(_Problem(g, {}, 1), ["t1"], 1)
    # grid oracle: no a*x + b ranks x := x + 1 while staying non-negative
    for a, b in itertools.product(range(-4, 5), repeat=2):
        ranks = all(a * (xv + 1) + b <= a * xv + b - 1 for xv in range(-20, 21))
        nonneg = all(a * xv + b >= 0 for xv in range(-20, 21))
        assert not (ranks and nonneg)


def test_unreachable_transition_ranked_vacuously():
    g = lower(parse("while x >= 0 do if x > 1 and x < 0 then y := y + 1 else x := x - 1 fi od"))
    prob = _Problem(g, {}, 1)
    dead = [t.id for t in g.ranked_transitions if t.id not in prob.live]
    assert dead
    U = [t.id for t in g.ranked_transitions]
    assert attempt_strict_dimension(prob, U, dead, 1) is not None
    cert = synthesize(g, {}, Strategy.SMC)
    assert cert and all(cert.lv[d] >= 1 for d in dead)


def test_normal_update_pins_target_coefficient():
    low = lower_full(parse("while y >= 0 do x := sample(norm(0, 1)); y := y - 1 od"))
    g = low.pcfg
    prob = _Problem(g, {}, 1)
    tmpl = prob.template(1)
    (t,) = [t for t in g.transitions if t.update and t.update[0] == "x"]
    _, eqs = _unranked_group(prob, t.id, tmpl)
    assert eqs == [tmpl[t.targets[0]].coeff("x")]
    cert = synthesize(g, {}, Strategy.SMC)
    assert cert and check_certificate(g, {}, cert.eta, cert.lv, Flavor.SC_MCLC).ok


def test_cousot9_lwn_three_dimensions():
    m = bench.load_model(CORPUS / "cousot9.pp", CORPUS / "cousot9.inv")
    cert = synthesize(m.pcfg, m.inv, Strategy.LWN)
    assert cert and cert.dimension == 3
    assert all(b == NONNEG for b in cert.branch.values())
    assert check_certificate(m.pcfg, m.inv, cert.eta, cert.lv, Flavor.LW).ok


@pytest.mark.parametrize("name", ["cousot9.pp", "countUp_pa.pp", "realheapsort.pp"])
def test_lw_certificate_implies_multiple_choice_success(name):
    m = bench.load_model(CORPUS / name, bench.find_inv(CORPUS / name))
    lw = synthesize(m.pcfg, m.inv, Strategy.LWN)
    assert lw and check_certificate(m.pcfg, m.inv, lw.eta, lw.lv, Flavor.LW).ok
    for s in (Strategy.SMC, Strategy.EMC):
        assert synthesize(m.pcfg, m.inv, s)


def test_max_dim_reported_distinctly(fig2):
    g, inv = fig2
    res = synthesize(g, inv, Strategy.SMC, max_dim=1)
    assert not res and res.reason == "max-dim"


def test_timeout_raises(fig2):
    g, inv = fig2
    with pytest.raises(TimeoutError):
        synthesize(g, inv, Strategy.EMC, deadline=0.0)


def test_custom_ranking_constant(fig2):
    g, inv = fig2
    cert = synthesize(g, inv, Strategy.SMC, c=F(1, 2))
    assert cert and check_certificate(g, inv, cert.eta, cert.lv, Flavor.SC_MCLC, c=F(1, 2)).ok


# --- round trip on generated loops ------------------------------------------

@st.composite
def loop_program(draw):
    k = draw(st.integers(1, 3))
    step = draw(st.sampled_from(["1", "sample(unif(0, 2))", "ndet(1, 2)", "sample(unif(-1, 2))"]))
    inner = draw(st.booleans())
    body = f"x := x - {step}" if not step.startswith("ndet") else "x := x - ndet(1, 2)"
    if inner:
        body = f"y := {k}; while y > 0 do y := y - 1 od; " + body
    if draw(st.booleans()):
        body = f"if prob(1/2) then {body} else skip fi"
    if draw(st.booleans()):
        body = f"if star then z := z + 1 else skip fi; {body}"
    return f"x := {draw(st.integers(0, 5))}; while x > 0 do {body} od"


@settings(max_examples=25, deadline=None)
@given(loop_program())
def test_certificates_round_trip(text):
    low = lower_full(parse(text))
    inv, _ = infer_invariants(low.pcfg, {}, low.loop_invariants)
    results = {}
    for s in Strategy:
        cert = synthesize(low.pcfg, inv, s)
        results[s] = bool(cert)
        if cert:
            assert cert.dimension <= len(low.pcfg.ranked_transitions)
            assert check_certificate(low.pcfg, inv, cert.eta, cert.lv, matching_flavor(s)).ok
            if s is Strategy.STR:
                assert check_certificate(low.pcfg, inv, cert.eta, cert.lv, Flavor.ST).ok
    chain = [results[s] for s in (Strategy.STR, Strategy.LWN, Strategy.SMC, Strategy.EMC)]
    assert chain == sorted(chain)
