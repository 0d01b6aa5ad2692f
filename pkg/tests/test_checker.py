from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from lexrsm.checker import (Flavor, audit_invariant, check_certificate, check_mclc,
                            check_stability_at_negativity)
from lexrsm.frontend import lower, parse, parse_linexpr
from lexrsm.linear import LinExpr, Polyhedron, ge, le
from lexrsm.pcfg import PCFG, DetLinear, MeasurableMap, Transition

# fig2 certificate: eta per location and the level map of its transitions
FIG2_ETA = {
    "l0": ("15", "12 - y", "2"),
    "l1": ("15 - 2x", "12 - y", "1"),
    "l2": ("15 - 2x", "12 - y", "0"),
    "l3": ("15 - 2x", "11 - y", "2"),
    "l4": ("14 - 2x", "0", "1"),
    "l5": ("0", "0", "0"),
}
FIG2_LV = {"t1": 3, "t2": 3, "t3": 1, "t4": 2, "t5": 1, "t6": 3, "t7": 1, "t_out": 0}


def mm(table):
    dim = len(next(iter(table.values())))
    return MeasurableMap(dim, {l: tuple(parse_linexpr(s) for s in v) for l, v in table.items()})


@pytest.mark.parametrize("flavor", [Flavor.LLEX, Flavor.SC, Flavor.SC_MCLC])
def test_fig2_certificate_accepted(fig2, flavor):
    g, inv = fig2
    assert check_certificate(g, inv, mm(FIG2_ETA), FIG2_LV, flavor).ok


@pytest.mark.parametrize("flavor", [Flavor.ST, Flavor.LW])
def test_fig2_certificate_not_strongly_nonnegative(fig2, flavor):
    g, inv = fig2
    v = check_certificate(g, inv, mm(FIG2_ETA), FIG2_LV, flavor)
    assert not v.ok
    assert all(x.clause == "non-negativity" for x in v.violations)
    assert any(x.dimension == 2 for x in v.violations)


def test_fig2_st_witness_at_l1(fig2):
    g, inv = fig2
    v = check_certificate(g, inv, mm(FIG2_ETA), FIG2_LV, Flavor.ST)
    at_l1 = [x for x in v.violations if x.location == "l1" and x.dimension == 2]
    assert at_l1
    w = at_l1[0].witness
    assert inv["l1"].holds(w) or inv["l1"].closure().holds(w)
    assert parse_linexpr("12 - y").evaluate(w) < 0


def test_fig2_invariants_inductive(fig2):
    g, inv = fig2
    assert audit_invariant(g, inv).ok


def test_fig2_stability(fig2):
    g, inv = fig2
    assert check_stability_at_negativity(g, inv, mm(FIG2_ETA), FIG2_LV).ok


@pytest.mark.parametrize("loc,k,val", [("l3", 2, "12 - y"), ("l4", 1, "15 - 2x"), ("l1", 3, "2")])
def test_tampered_certificate_rejected_with_valid_witness(fig2, loc, k, val):
    g, inv = fig2
    table = {l: list(v) for l, v in FIG2_ETA.items()}
    table[loc][k - 1] = val
    v = check_certificate(g, inv, mm(table), FIG2_LV, Flavor.SC_MCLC)
    assert v.violations
    for viol in v.violations:
        if viol.consequent is not None:
            assert viol.antecedent.closure().holds(viol.witness)
            assert not viol.consequent.holds(viol.witness)


def _line(update=None, guard=Polyhedron()):
    """l0 -> l1 -> l_out: a two-step pCFG with one variable."""
    trs = (Transition("t1", "l0", ((F(1), "l1"),), update, guard, 0),
           Transition("t2", "l1", ((F(1), "l2"),), None, Polyhedron(), 1),
           Transition("t_out", "l2", ((F(1), "l2"),), None, Polyhedron(), 2))
    return PCFG(("y",), ("l0", "l1", "l2"), trs, "l0", "l2")


def test_trivial_exit_certificate():
    g = PCFG(("x",), ("a", "b"), (Transition("t1", "a", ((F(1), "b"),)),
                                  Transition("t_out", "b", ((F(1), "b"),))), "a", "b")
    eta = MeasurableMap(1, {"a": (LinExpr.constant(1),), "b": (LinExpr(),)})
    assert check_certificate(g, {}, eta, {"t1": 1, "t_out": 0}, Flavor.ST).ok


def test_mclc_both_branches_fail():
    # the left component y may be negative and may increase along a branch
    src = "while x >= 0 do if prob(1/2) then y := y + 1 else y := y - 1 fi; x := x - 1 od"
    g = lower(parse(src))
    y = LinExpr.var("y")
    eta = MeasurableMap(2, {l: (y, LinExpr.var("x") + 3) for l in g.locations})
    lv = {t.id: 2 for t in g.ranked_transitions} | {"t_out": 0}
    v = check_mclc(g, {}, eta, lv)
    assert len(v.violations) == 2
    assert {x.detail[:3] for x in v.violations} == {"(6)", "(7)"}


def test_mclc_last_dimension_vacuous():
    g = _line()
    eta = MeasurableMap(1, {"l0": (LinExpr.var("y"),), "l1": (LinExpr.var("y"),), "l2": (LinExpr(),)})
    assert check_mclc(g, {}, eta, {"t1": 1, "t2": 1, "t_out": 0}).ok


def test_stability_jump_is_violation():
    g = _line()
    y = LinExpr.var("y")
    inv = {"l0": Polyhedron([ge(y, -1)])}
    eta = MeasurableMap(2, {"l0": (y, LinExpr.constant(3)), "l1": (y + 2, LinExpr.constant(2)),
                            "l2": (LinExpr(), LinExpr())})
    lv = {"t1": 2, "t2": 2, "t_out": 0}
    v = check_stability_at_negativity(g, inv, eta, lv)
    assert v.violations and v.violations[0].clause == "stability"


def test_stability_boundary_is_inconclusive_when_closed():
    g = _line()
    y = LinExpr.var("y")
    eta = MeasurableMap(2, {"l0": (y, LinExpr.constant(3)), "l1": (y, LinExpr.constant(2)),
                            "l2": (LinExpr(), LinExpr())})
    lv = {"t1": 2, "t2": 2, "t_out": 0}
    assert check_stability_at_negativity(g, {}, eta, lv).ok
    closed = check_stability_at_negativity(g, {}, eta, lv, closed=True)
    assert not closed.violations and closed.inconclusive


def test_audit_non_inductive_atom():
    x = LinExpr.var("x")
    g = PCFG(("x",), ("a", "b"), (Transition("t1", "a", ((F(1), "a"),), ("x", DetLinear(x + 1)), Polyhedron(), 0),
                                  Transition("t2", "a", ((F(1), "b"),), None, Polyhedron(), 1),
                                  Transition("t_out", "b", ((F(1), "b"),), None, Polyhedron(), 2)), "a", "b")
    inv = {"a": Polyhedron([le(x, 0)])}
    v = audit_invariant(g, inv)
    assert not v.ok
    assert audit_invariant(g, {}).ok


# flavor lattice: ST => LW => SC on arbitrary single-loop candidates
coef = st.integers(-3, 3)


@settings(max_examples=60, deadline=None)
@given(a=coef, b=st.integers(-5, 5), c=coef, d=st.integers(-5, 5), lv1=st.integers(1, 2), lv2=st.integers(1, 2))
def test_flavor_lattice(a, b, c, d, lv1, lv2):
    g = lower(parse("while x >= 0 do x := x - 1 od"))
    x = LinExpr.var("x")
    exprs = {l: (x * a + b, x * c + d) for l in g.locations}
    exprs[g.l_out] = (LinExpr(), LinExpr())
    eta = MeasurableMap(2, exprs)
    ids = [t.id for t in g.ranked_transitions]
    lv = {tid: (lv1 if i % 2 else lv2) for i, tid in enumerate(ids)} | {"t_out": 0}
    ok = {f: check_certificate(g, {}, eta, lv, f).ok for f in Flavor}
    if ok[Flavor.ST]:
        assert ok[Flavor.LW]
    if ok[Flavor.LW]:
        assert ok[Flavor.SC]
    if ok[Flavor.SC_MCLC]:
        assert ok[Flavor.SC]
        assert check_stability_at_negativity(g, {}, eta, lv).ok
