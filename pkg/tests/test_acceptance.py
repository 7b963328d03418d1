"""Acceptance suite: one test per numbered criterion.

A `criterion N PASS/FAIL` line per criterion is printed in the terminal
summary (see conftest.py).
"""

import itertools
import random
import time
from fractions import Fraction

import pytest

from tanglemachine import beliefnet as bn
from tanglemachine.algebra import FOX3, LINEAR, MIXED2X2, Fox3, Mat, cloning_sides, kron
from tanglemachine.beliefnet import UNSURE, Belief, IPParams
from tanglemachine.colouring import DETERMINED, evaluate_io, propagate
from tanglemachine.gates import A0, A1, ZERO, AndF3, AndQ, NotF3, NotQ, build_gate, compile_circuit, eval_bits
from tanglemachine.gates import half_adder, truth_table_circuit
from tanglemachine.rewrite import QuagmaSemantics, apply_move, check_bisimilar, find_moves, is_zero_knowledge
from tanglemachine.rewrite import random_machine
from tanglemachine.turing import OP_COUNT_K, TMConfig, compiled_trajectory, op_count, random_spec
from tanglemachine.turing import reference_trajectory, unary_increment

F = Fraction
criterion = pytest.mark.criterion


class Timer:
    def __enter__(self):
        self.start = time.perf_counter()
        return self

    def __exit__(self, *exc):
        self.seconds = time.perf_counter() - self.start


# ---------------------------------------------------------------- 1


@criterion(1, "gate tables (quagma NOT/AND with beta intermediates, Fox-3 NOT/AND)")
def test_gate_tables():
    with Timer() as t:
        not_q = build_gate(NotQ)
        assert [evaluate_io(not_q, MIXED2X2, [x]) for x in (A0, A1)] == [(A1,), (A0,)]

        s = A0 + A1
        table = {
            (A0, A0): (A0 - A1, A0, A0, A0),
            (A0, A1): (s, s, A0, A0),
            (A1, A0): (s, s, A0, A0),
            (A1, A1): (A1 - A0, A1, ZERO, A1),
        }
        and_q = build_gate(AndQ)
        betas = [and_q.register_named(f"beta{k}") for k in (1, 2, 3)]
        for (x, y), row in table.items():
            col = propagate(and_q, MIXED2X2, dict(zip(and_q.inputs, (x, y))))
            assert col.status == DETERMINED
            assert tuple(col[r] for r in betas) + (col[and_q.outputs[0]],) == row

        not_f = build_gate(NotF3)
        assert [evaluate_io(not_f, FOX3, [Fox3(x)]) for x in (0, 1)] == [(Fox3(1),), (Fox3(0),)]
        and_f = build_gate(AndF3)
        for x, y in itertools.product((0, 1), repeat=2):
            assert evaluate_io(and_f, FOX3, [Fox3(x), Fox3(y)]) == (Fox3(min(x, y)),)
    assert t.seconds < 1


# ---------------------------------------------------------------- 2


@criterion(2, "all 16 binary functions on both backends, half adder")
def test_all_binary_functions():
    with Timer() as t:
        for backend in ("quagma", "fox3"):
            for code in range(16):
                table = [(code >> k) & 1 for k in range(4)]
                m = compile_circuit(truth_table_circuit(table), backend)
                for k, (x, y) in enumerate(itertools.product((0, 1), repeat=2)):
                    assert eval_bits(m, backend, [x, y]) == (table[k],)
            adder = compile_circuit(half_adder(), backend)
            for x, y in itertools.product((0, 1), repeat=2):
                assert eval_bits(adder, backend, [x, y]) == (x ^ y, x & y)
    assert t.seconds < 10


# ---------------------------------------------------------------- 3


@criterion(3, "unary increment compiled with m=12, N=20 follows the reference trajectory")
def test_turing_trajectory():
    with Timer() as t:
        spec = unary_increment()
        start = TMConfig(1, (0, 1, 1, 1, 1, 1) + (2,) * 6, 1)
        want = reference_trajectory(spec, start, 20)
        col, got = compiled_trajectory(spec, start, 20)
        assert col.status == DETERMINED
        assert len(got) == 21
        assert got == want
        # the run reaches the halting state and then stays put
        assert want[-1].state == spec.qh
    assert t.seconds < 30


# ---------------------------------------------------------------- 4


@criterion(4, "op_count <= 9n + K with one K for n = 2..5")
def test_op_count_linear_bound():
    rng = random.Random(2024)
    for n in (2, 3, 4, 5):
        for _ in range(10):
            assert op_count(random_spec(n, rng)) <= 9 * n + OP_COUNT_K


# ---------------------------------------------------------------- 5


@criterion(5, "worked belief example on both equivalent diagrams")
def test_worked_example():
    p = IPParams(1, F(1, 2), F(1, 2))
    for net in bn.equivalent_networks():
        vals = bn.propagate_network(net, p)
        m = net.machine
        assert vals[m.register_named("X2")] == Belief(F(5, 8), F(21, 32))
        assert vals[m.register_named("Y1")] == Belief(F(3, 4), F(3, 8))


# ---------------------------------------------------------------- 6


@criterion(6, "ladder decides exactly for chi in {2,3,4}; closed form equals propagation")
def test_ladder():
    p = IPParams(1, F(1, 2), F(1, 2))
    assert [chi for chi in range(1, 6) if bn.ladder_decides(chi, p)] == [2, 3, 4]
    # the inequalities written out: (1-c d)^chi < c d and (1-s d)^chi > s d
    for chi in range(1, 6):
        holds = F(1, 2) ** chi < F(1, 2) and F(3, 4) ** chi > F(1, 4)
        assert bn.ladder_decides(chi, p) == holds
    for chi in range(1, 7):
        net = bn.ladder_network(chi)
        assert bn.propagate_network(net, p)[net.decider] == bn.ladder_closed_form(chi, p)


# ---------------------------------------------------------------- 7


def _sample_params(rng):
    c = F(rng.randint(9, 16), 16)
    eps = F(rng.randint(1, int(c * 16) - 1), 16)
    d = F(rng.randint(1, 15), 16)
    return c, eps, d


def _track_gap(x, y):
    return max(abs(x[0].a - y[0].a), abs(x[1].a - y[1].a)), max(abs(x[0].b - y[0].b), abs(x[1].b - y[1].b))


@criterion(7, "steady state margin, geometric convergence, logarithmic iteration count")
def test_hopf_chernoff():
    rng = random.Random(7)
    for _ in range(50):
        c, eps, d = _sample_params(rng)
        p = bn.hc_params(c, eps, d)
        steady = bn.hopf_chernoff_steady(*bn.hopf_chernoff_beliefs(c, eps, d), p)
        assert steady[0].a == F(1, 2) + eps * d / 12
        al, be = bn.hopf_chernoff_beliefs(c, eps, d)
        chi = bn.hopf_chernoff_iterations(eps, d, c)
        start = (UNSURE, UNSURE)
        got = bn.hopf_chernoff_iterate(*start, al, be, p, chi)
        g0t, g0f = _track_gap(start, steady)
        gt, gf = _track_gap(got, steady)
        assert gt <= (1 - p.h_true) ** chi * g0t
        assert gf <= (1 - p.h_false) ** chi * g0f
    chis = [bn.hopf_chernoff_iterations(F(1, 2**k), F(1, 2)) for k in range(6, 14)]
    assert len({b - a for a, b in zip(chis, chis[1:])}) == 1


# ---------------------------------------------------------------- 8


@criterion(8, "certificate-level Monte Carlo: soundness 1/(3-2s), completeness at delta=0.99")
def test_pcp_monte_carlo():
    p = IPParams(1, F(3, 4), F(99, 100))
    with Timer() as t:
        non = bn.pcp_run(p, False, 100_000, seed=8)
        mem = bn.pcp_run(p, True, 100_000, seed=8)
    print(f"non-member rate {non.rate:.5f} +- {non.stderr:.5f}, member rate {mem.rate:.5f}")
    assert non.rate <= float(bn.soundness_bound(F(3, 4))) + 3 * non.stderr
    assert mem.rate >= 0.95
    assert t.seconds < 60


# ---------------------------------------------------------------- 9


QUAGMAS = {"linear": LINEAR, "fox3": FOX3, "mixed2x2": MIXED2X2}


@criterion(9, "every move on 200 seeded machines preserves I/O; fake R2 changes the joint law")
def test_rewrite_soundness():
    names = sorted(QUAGMAS)
    checked = 0
    for seed in range(200):
        rng = random.Random(seed)
        qname = names[seed % len(names)]
        m = random_machine(rng, qname, wye_prob=0.0 if qname == "mixed2x2" else 0.25)
        sem = QuagmaSemantics(QUAGMAS[qname])
        for move, site in find_moves(m, sem):
            assert check_bisimilar(m, apply_move(m, move, site, sem), sem, samples=25), (seed, move)
            checked += 1
    assert checked > 200

    p = IPParams(1, F(1, 2), F(1, 2))
    shared, split = bn.shared_vs_split_agents()
    tv = bn.total_variation(
        bn.exact_joint(shared, p, True, list(shared.machine.outputs)),
        bn.exact_joint(split, p, True, list(split.machine.outputs)),
    )
    assert tv > F(1, 20)


# ---------------------------------------------------------------- 10


@criterion(10, "zero-knowledge example: zk at 3/4, not_deciding at 2/5, formulas match")
def test_zero_knowledge():
    left, right = bn.zk_networks()
    assert is_zero_knowledge(right, bn.zk_params(F(3, 4)), 1, 16).verdict == "zk"
    for net in (left, right):
        assert is_zero_knowledge(net, bn.zk_params(F(2, 5)), 1, 16).verdict == "not_deciding"
    # every coefficient has degree <= 2 in delta, so agreement at 5 points is identity
    for d in (F(1, 7), F(1, 3), F(1, 2), F(3, 4), F(9, 10)):
        p = bn.zk_params(d)
        vl, vr = bn.propagate_network(left, p), bn.propagate_network(right, p)
        x1 = vr[right.machine.register_named("X1")]
        x1bar = vl[left.machine.register_named("X1bar")]
        # (True coefficient if x in L, False coefficient if x not in L)
        assert (x1.a, x1.b) == (d / 2, 1 - d / 4)
        assert (x1bar.a, x1bar.b) == (d, 1 - d / 2)
        for x2 in (vl[left.decider], vr[right.decider]):
            assert (x2.a, x2.b) == (d * (1 - d) + d / 2, (1 - d / 2) ** 2 + d / 4)


# ---------------------------------------------------------------- 11


def _invertible(rng):
    while True:
        m = Mat.of([[F(rng.randint(-5, 5), rng.randint(1, 4)) for _ in range(2)] for _ in range(2)])
        if m.det() != 0:
            return m


@criterion(11, "cloning identity fails for distinct matrices, holds for equal ones")
def test_no_cloning():
    rng = random.Random(11)
    pairs = 0
    while pairs < 50:
        a, b = _invertible(rng), _invertible(rng)
        if a == b:
            continue
        lhs, rhs = cloning_sides(a, b)
        assert lhs != rhs
        # independent oracle: the difference is -(a-b)x(a-b)/4
        assert lhs - rhs == kron(a - b, a - b).scale(F(-1, 4))
        same = cloning_sides(a, a)
        assert same[0] == same[1]
        pairs += 1
