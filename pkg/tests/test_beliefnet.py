import math
import random
from fractions import Fraction

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from tanglemachine import beliefnet as bn
from tanglemachine.beliefnet import FALSE, TRUE, UNSURE, Belief, IPParams
from tanglemachine.diagram import Builder, close

F = Fraction
unit = st.fractions(min_value=0, max_value=1, max_denominator=16)
beliefs = st.builds(Belief, unit, unit)


@st.composite
def params(draw):
    c = draw(st.fractions(min_value=F(1, 8), max_value=1, max_denominator=16))
    s = draw(st.fractions(min_value=F(1, 16), max_value=c, max_denominator=16).filter(lambda v: 0 < v < c))
    d = draw(st.fractions(min_value=F(1, 16), max_value=F(15, 16), max_denominator=16))
    return IPParams(c, s, d)


def test_belief_validation_and_text():
    assert str(Belief(F(1, 2), 1)) == "1/2|1"
    assert Belief.parse("3/4|1/8") == Belief(F(3, 4), F(1, 8))
    with pytest.raises(ValueError):
        Belief(2, 0)
    with pytest.raises(ValueError):
        Belief.parse("1/2")


def test_params_validation():
    with pytest.raises(ValueError):
        IPParams(F(1, 2), F(3, 4), F(1, 2))
    with pytest.raises(ValueError):
        IPParams(1, F(1, 2), 1)


@given(beliefs, beliefs, params())
def test_interaction_is_convex_per_track(x, y, p):
    z = bn.interact(x, y, p)
    assert z.a == x.a + p.h_true * (y.a - x.a)
    assert z.b == x.b + p.h_false * (y.b - x.b)
    assert min(x.a, y.a) <= z.a <= max(x.a, y.a)


def test_decides_threshold():
    assert bn.decides(Belief(F(9, 16), F(9, 16)), 1, 16)
    assert not bn.decides(Belief(F(9, 16), F(1, 2)), 1, 16)
    with pytest.raises(ValueError):
        bn.decides(TRUE, 1, 0)


def test_worked_example_on_both_diagrams():
    p = IPParams(1, F(1, 2), F(1, 2))
    for net in bn.equivalent_networks():
        vals = bn.propagate_network(net, p)
        m = net.machine
        assert vals[m.register_named("X2")] == Belief(F(5, 8), F(21, 32))
        assert vals[m.register_named("Y1")] == Belief(F(3, 4), F(3, 8))


@settings(max_examples=30)
@given(params())
def test_equivalent_diagrams_agree_for_all_parameters(p):
    left, right = bn.equivalent_networks()
    vl, vr = bn.propagate_network(left, p), bn.propagate_network(right, p)
    assert [vl[r] for r in left.machine.outputs] == [vr[r] for r in right.machine.outputs]


def test_cyclic_network_rejected():
    b = Builder("cyc", "belief")
    x = b.input("x")
    z = b.const(UNSURE)
    y = b.act1(z, bn.BELIEF, b.act1(z, bn.BELIEF, x))
    b.output(y)
    m = close(b.build(), [(y, x)])
    with pytest.raises(bn.CyclicNetworkError):
        bn.propagate_network(bn.BeliefNetwork(m, {}), IPParams(1, F(1, 2), F(1, 2)))


def ladder_oracle(chi, h):
    """Per-track ladder by direct recursion on (True weight, False weight)."""
    t, f = F(0), F(1)
    for i in range(1, chi + 1):
        at, af = (F(1), F(0)) if i == chi else (F(1, 2), F(1, 2))
        t, f = (1 - h) * t + h * at, (1 - h) * f + h * af
    return t, f


@pytest.mark.parametrize("chi", range(1, 8))
def test_ladder_closed_form(chi):
    p = IPParams(1, F(1, 2), F(1, 2))
    closed = bn.ladder_closed_form(chi, p)
    net = bn.ladder_network(chi)
    assert bn.propagate_network(net, p)[net.decider] == closed
    assert closed.a == ladder_oracle(chi, p.h_true)[0]
    assert closed.b == ladder_oracle(chi, p.h_false)[1]


def test_ladder_four():
    p = IPParams(1, F(1, 2), F(1, 2))
    assert bn.ladder_closed_form(4, p) == Belief(F(23, 32), F(273, 512))


def test_ladder_intermediates_never_decide():
    p = IPParams(1, F(1, 2), F(3, 4))
    net = bn.ladder_network(4)
    vals = bn.propagate_network(net, p)
    assert not any(bn.decides(vals[r], 1, 16) for r in net.intermediates())


def test_chi_bounds():
    b = bn.chi_bounds(IPParams(1, F(1, 2), F(1, 2)))
    assert b.exact[0] == pytest.approx(1.0)
    assert b.exact[1] == pytest.approx(math.log(0.25) / math.log(0.75))
    assert b.stated_contained
    assert b.integers() == [2, 3, 4]
    assert bn.exists_integer_in(b.exact)
    assert not bn.exists_integer_in((1.2, 1.9))


@settings(max_examples=40)
@given(beliefs, beliefs, beliefs, beliefs, params())
def test_block_matches_matrix_step(x1, x2, al, be, p):
    assert bn.hopf_chernoff_block(x1, x2, al, be, p) == bn.hopf_chernoff_step(x1, x2, al, be, p)


def test_network_matches_iteration():
    p = bn.hc_params(1, F(1, 4), F(1, 2))
    al, be = bn.hopf_chernoff_beliefs(1, F(1, 4), F(1, 2))
    chi = 3
    m = bn.hopf_chernoff_network(chi)
    net = bn.BeliefNetwork(m, dict(zip(m.inputs, (UNSURE, FALSE, al, be))))
    vals = bn.propagate_network(net, p)
    want = bn.hopf_chernoff_iterate(UNSURE, FALSE, al, be, p, chi)
    assert (vals[m.outputs[0]], vals[m.outputs[1]]) == want


@settings(max_examples=40)
@given(beliefs, beliefs, params())
def test_steady_state_is_a_fixed_point(al, be, p):
    s1, s2 = bn.hopf_chernoff_steady(al, be, p)
    assert bn.hopf_chernoff_step(s1, s2, al, be, p) == (s1, s2)


def test_published_beliefs_steady_values():
    c, eps, d = 1, F(1, 4), F(1, 2)
    p = bn.hc_params(c, eps, d)
    out1, _ = bn.hopf_chernoff_steady(*bn.hopf_chernoff_beliefs(c, eps, d), p)
    assert out1.a == F(1, 2) + eps * d / 12
    assert out1 == Belief(F(49, 96), F(149, 288))


def test_solved_beliefs_hit_both_margins():
    c, eps, d = 1, F(1, 4), F(1, 2)
    p = bn.hc_params(c, eps, d)
    al, be = bn.hopf_chernoff_solved_beliefs(c, eps, d)
    assert (al, be) == (Belief(F(31, 96), F(65, 96)), Belief(F(67, 96), F(29, 96)))
    out1, _ = bn.hopf_chernoff_steady(al, be, p)
    sig = eps * d / 12
    assert out1.a == F(1, 2) + sig
    # False weight at h = s delta equals 1 - (1/2 - sigma)
    assert out1.b == F(1, 2) + sig


def test_eigenvalues_match_characteristic_polynomial():
    for h in (F(1, 3), F(1, 2), F(7, 10)):
        (p, q), (r, s) = bn.a_matrix(h)
        for lam in bn.a_eigenvalues(h):
            assert (p - lam) * (s - lam) - q * r == 0
        assert max(abs(v) for v in bn.a_eigenvalues(h)) == 1 - h


@pytest.mark.parametrize("eps", [F(1, 4), F(1, 8), F(1, 16)])
def test_iterations_reach_the_bound(eps):
    d = F(1, 2)
    chi = bn.hopf_chernoff_iterations(eps, d)
    h = min(d, (1 - eps) * d)
    assert (1 - h) ** chi <= eps * d / 24 < (1 - h) ** (chi - 1)


def test_iterations_grow_logarithmically():
    d = F(1, 2)
    chis = [bn.hopf_chernoff_iterations(F(1, 2**k), d) for k in range(6, 14)]
    steps = {b - a for a, b in zip(chis, chis[1:])}
    assert steps == {1}


def test_soundness_bound():
    assert bn.soundness_bound(F(3, 4)) == F(2, 3)
    with pytest.raises(ValueError):
        bn.soundness_bound(1)


def test_pcp_run_reproducible_and_job_independent():
    p = IPParams(1, F(3, 4), F(99, 100))
    a = bn.pcp_run(p, True, 20_000, seed=11)
    b = bn.pcp_run(p, True, 20_000, seed=11, jobs=2)
    assert a == b
    assert bn.pcp_run(p, True, 20_000, seed=12) != a


@pytest.mark.parametrize("member", [True, False])
def test_pcp_run_agrees_with_exact(member):
    p = IPParams(1, F(3, 4), F(99, 100))
    res = bn.pcp_run(p, member, 30_000, seed=3)
    assert abs(res.rate - float(bn.pcp_exact(p, member))) < 5 * res.stderr


def test_exact_joint_marginals_match_propagation():
    p = IPParams(1, F(1, 2), F(3, 4))
    left, _ = bn.equivalent_networks()
    vals = bn.propagate_network(left, p)
    regs = list(left.machine.outputs)
    for member in (True, False):
        joint = bn.exact_joint(left, p, member, regs)
        assert sum(joint.values()) == 1
        for k, r in enumerate(regs):
            t = sum(w for key, w in joint.items() if key[k])
            assert t == (vals[r].a if member else 1 - vals[r].b)


def test_mc_matches_propagation():
    p = IPParams(1, F(1, 2), F(1, 2))
    left, _ = bn.equivalent_networks()
    vals = bn.propagate_network(left, p)
    freq = bn.mc_simulate(left, p, True, 40_000, seed=5)
    for r in left.machine.outputs:
        assert freq[r] == pytest.approx(float(vals[r].a), abs=0.02)


def test_shared_agent_correlates_patients():
    p = IPParams(1, F(1, 2), F(1, 2))
    shared, split = bn.shared_vs_split_agents()
    regs_s = list(shared.machine.outputs)
    regs_p = list(split.machine.outputs)
    # identical marginals
    vs, vp = bn.propagate_network(shared, p), bn.propagate_network(split, p)
    assert [vs[r] for r in regs_s] == [vp[r] for r in regs_p]
    tv = bn.total_variation(bn.exact_joint(shared, p, True, regs_s), bn.exact_joint(split, p, True, regs_p))
    assert tv == F(1, 8)


def test_zk_formulas_match_propagation_as_polynomials():
    # each coefficient is a polynomial of degree <= 2 in delta: three points fix it
    left, right = bn.zk_networks()
    rng = random.Random(0)
    points = {F(rng.randint(1, 99), 100) for _ in range(6)}
    for d in points:
        p = bn.zk_params(d)
        want = bn.zk_formulas(d)
        vl, vr = bn.propagate_network(left, p), bn.propagate_network(right, p)
        assert vl[left.machine.register_named("X1bar")] == want["X1bar"]
        assert vr[right.machine.register_named("X1")] == want["X1"]
        assert vl[left.decider] == vr[right.decider] == want["X2"]
        # closed forms written out independently
        assert want["X2"] == Belief(d * (1 - d) + d / 2, (1 - d / 2) ** 2 + d / 4)
        assert want["X1"] == Belief(d / 2, 1 - d / 4)
        assert want["X1bar"] == Belief(d, 1 - d / 2)
