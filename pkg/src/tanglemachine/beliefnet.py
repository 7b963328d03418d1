"""Belief networks: deformed interactive proofs as tangle machines.

A belief carries two coefficients. ``a`` is the weight of True, tracked
under the switching probability h = c*delta that applies when the claim
holds. ``b`` is the weight of False, tracked under h = s*delta that applies
when it does not. One propagation therefore answers both cases at once.
"""

from __future__ import annotations

import math
from collections import Counter
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from fractions import Fraction
from itertools import product
from typing import Mapping

import numpy as np

from .algebra import Deform
from .diagram import Builder, DiagramError, Interaction, TangleMachine, require_valid

Rational = Fraction


def _q(v) -> Fraction:
    return v if isinstance(v, Fraction) else Fraction(v)


@dataclass(frozen=True)
class Belief:
    """a<True> + b<False>; a + b need not be 1."""

    a: Fraction
    b: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "a", _q(self.a))
        object.__setattr__(self, "b", _q(self.b))
        if not (0 <= self.a <= 1 and 0 <= self.b <= 1):
            raise ValueError(f"belief coefficients must lie in [0,1], got {self.a}, {self.b}")

    def __str__(self) -> str:
        return f"{_fmt(self.a)}|{_fmt(self.b)}"

    @classmethod
    def parse(cls, text: str) -> "Belief":
        a, sep, b = text.partition("|")
        if not sep:
            raise ValueError(f"belief literal must be a|b, got {text!r}")
        return cls(Fraction(a.strip()), Fraction(b.strip()))


def _fmt(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


TRUE = Belief(1, 0)
FALSE = Belief(0, 1)
UNSURE = Belief(Fraction(1, 2), Fraction(1, 2))


@dataclass(frozen=True)
class IPParams:
    c: Fraction
    s: Fraction
    delta: Fraction

    def __post_init__(self) -> None:
        for k in ("c", "s", "delta"):
            object.__setattr__(self, k, _q(getattr(self, k)))
        if not (0 < self.s < self.c <= 1):
            raise ValueError("need 0 < s < c <= 1")
        if not (0 < self.delta < 1):
            raise ValueError("delta must lie in (0, 1)")

    @property
    def h_true(self) -> Fraction:
        return self.c * self.delta

    @property
    def h_false(self) -> Fraction:
        return self.s * self.delta


def interact(patient: Belief, agent: Belief, p: IPParams) -> Belief:
    """(1-h) patient + h agent, on each track with its own h."""
    ht, hf = p.h_true, p.h_false
    return Belief((1 - ht) * patient.a + ht * agent.a, (1 - hf) * patient.b + hf * agent.b)


def decides(bel: Belief, kappa, word_len: int) -> bool:
    """Both tracks clear 1/2 + word_len**-kappa."""
    if word_len < 1:
        raise ValueError("word length must be positive")
    kappa = _q(kappa)
    if kappa.denominator == 1:
        threshold = Fraction(1, 2) + Fraction(1, word_len ** int(kappa)) if kappa >= 0 else None
        if threshold is not None:
            return bel.a >= threshold and bel.b >= threshold
    t = 0.5 + word_len ** (-float(kappa))
    return float(bel.a) >= t and float(bel.b) >= t


# ---------------------------------------------------------------- networks


class CyclicNetworkError(DiagramError):
    """Belief propagation needs an acyclic network."""


@dataclass(frozen=True)
class BeliefNetwork:
    """A wye-free machine with belief-update interactions.

    ``beliefs`` colours the input registers; free agents are machine
    constants. ``decider`` is the register whose belief is judged.
    """

    machine: TangleMachine
    beliefs: Mapping[int, Belief] = field(default_factory=dict)
    decider: int | None = None

    def __post_init__(self) -> None:
        m = self.machine
        require_valid(m)
        if m.wyes:
            raise DiagramError("belief networks have no wyes")
        for it in m.interactions:
            if not isinstance(it.op, Deform):
                raise DiagramError(f"interaction uses {it.op}, expected the belief rule")
        if set(self.beliefs) != set(m.inputs):
            raise DiagramError("initial beliefs must cover exactly the input registers")
        for r, c in m.constants.items():
            if not isinstance(c, Belief):
                raise DiagramError(f"constant register {r} is not a belief")
        if self.decider is not None and self.decider not in m.registers:
            raise DiagramError(f"decider {self.decider} is not a register")

    def with_machine(self, m: TangleMachine) -> "BeliefNetwork":
        """Same initial beliefs on a machine with the same inputs."""
        return BeliefNetwork(m, dict(zip(m.inputs, (self.beliefs[r] for r in self.machine.inputs))), _decider_for(self, m))

    def intermediates(self) -> list[int]:
        m = self.machine
        skip = set(m.inputs) | set(m.outputs) | set(m.constants)
        return [r for r in m.registers if r not in skip]


def _decider_for(net: BeliefNetwork, m: TangleMachine) -> int | None:
    if net.decider is None:
        return None
    if net.decider in net.machine.outputs:
        return m.outputs[net.machine.outputs.index(net.decider)]
    return net.decider if net.decider in m.registers else None


def propagate_network(net: BeliefNetwork, p: IPParams) -> dict[int, Belief]:
    """Forward evaluation; each interaction fires once its agent and patients are known."""
    m = net.machine
    known: dict[int, Belief] = dict(m.constants)
    known.update(net.beliefs)
    pending = list(m.interactions)
    while pending:
        rest = []
        for it in pending:
            if it.agent in known and all(i in known for i, _ in it.patients):
                y = known[it.agent]
                for i, o in it.patients:
                    known[o] = interact(known[i], y, p)
            else:
                rest.append(it)
        if len(rest) == len(pending):
            raise CyclicNetworkError(
                f"{len(rest)} interactions cannot fire: cyclic dependency or uncoloured free agent"
            )
        pending = rest
    return known


def _beliefs_machine(name: str) -> Builder:
    return Builder(name, "belief")


BELIEF = Deform()


def equivalent_networks() -> tuple[BeliefNetwork, BeliefNetwork]:
    """Three verifiers X, Y, Z; the two diagrams differ by one R3 move.

    Left:  X1 = X0^Y0, then Z0 acts on X1 and Y0.
    Right: Z0 acts on X0 and Y0, then Y1 acts on X1'.
    """
    init = {"X0": FALSE, "Y0": UNSURE, "Z0": TRUE}
    out = []
    for side in ("left", "right"):
        b = _beliefs_machine(f"equivalent_{side}")
        x0, y0, z0 = b.input("X0"), b.input("Y0"), b.input("Z0")
        if side == "left":
            x1 = b.act1(y0, BELIEF, x0, "X1")
            x2, y1 = b.act(z0, BELIEF, x1, y0, names=("X2", "Y1"))
        else:
            x1, y1 = b.act(z0, BELIEF, x0, y0, names=("X1'", "Y1"))
            x2 = b.act1(y1, BELIEF, x1, "X2")
        b.output(x2, y1)
        m = b.build()
        out.append(BeliefNetwork(m, {r: init[m.names[r]] for r in m.inputs}, x2))
    return out[0], out[1]


def zk_networks() -> tuple[BeliefNetwork, BeliefNetwork]:
    """Left machine decides at X1bar; right machine hides it behind Z = 1/2|1/2."""
    out = []
    for side in ("left", "right"):
        b = _beliefs_machine(f"zk_{side}")
        x0, y0 = b.input("X0"), b.input("Y0")
        z = b.const(UNSURE, "Z")
        if side == "left":
            xb = b.act1(y0, BELIEF, x0, "X1bar")
            x2, y1 = b.act(z, BELIEF, xb, y0, names=("X2", "Y1"))
        else:
            x1, y1 = b.act(z, BELIEF, x0, y0, names=("X1", "Y1"))
            x2 = b.act1(y1, BELIEF, x1, "X2")
        b.output(x2, y1)
        m = b.build()
        out.append(BeliefNetwork(m, {x0: FALSE, y0: TRUE}, x2))
    return out[0], out[1]


def zk_params(delta) -> IPParams:
    """Completeness delta and soundness delta/2, i.e. c = 1, s = 1/2."""
    return IPParams(1, Fraction(1, 2), _q(delta))


def zk_formulas(delta) -> dict[str, Belief]:
    """Closed forms for the zero-knowledge example."""
    d = _q(delta)
    return {
        "X1": Belief(d / 2, 1 - d / 4),
        "X1bar": Belief(d, 1 - d / 2),
        "X2": Belief(d * (1 - d) + d / 2, (1 - d / 2) ** 2 + d / 4),
    }


# ---------------------------------------------------------------- ladder


def ladder_network(chi: int) -> BeliefNetwork:
    """W0 = False meets agents V1..Vchi in order; V1..V(chi-1) are unsure, Vchi is True."""
    if chi < 1:
        raise ValueError("chi must be at least 1")
    b = _beliefs_machine(f"ladder_{chi}")
    w = b.input("W0")
    for i in range(1, chi + 1):
        v = b.const(TRUE if i == chi else UNSURE, f"V{i}")
        w = b.act1(v, BELIEF, w, f"W{i}")
    b.output(w)
    m = b.build()
    return BeliefNetwork(m, {m.inputs[0]: FALSE}, w)


def _ladder_track(chi: int, h: Fraction) -> tuple[Fraction, Fraction]:
    """(True weight, False weight) of the closed form at one h."""
    tail = (1 - h) ** chi
    mid = 1 - h - tail
    return h + mid / 2, tail + mid / 2


def ladder_closed_form(chi: int, p: IPParams) -> Belief:
    if chi < 1:
        raise ValueError("chi must be at least 1")
    return Belief(_ladder_track(chi, p.h_true)[0], _ladder_track(chi, p.h_false)[1])


def ladder_decides(chi: int, p: IPParams) -> bool:
    """(1-c delta)^chi < c delta and (1-s delta)^chi > s delta."""
    ht, hf = p.h_true, p.h_false
    return (1 - ht) ** chi < ht and (1 - hf) ** chi > hf


@dataclass(frozen=True)
class ChiBounds:
    exact: tuple[float, float]
    stated: tuple[float, float]

    @property
    def stated_contained(self) -> bool:
        return self.exact[0] <= self.stated[0] and self.stated[1] <= self.exact[1]

    def integers(self) -> list[int]:
        lo, hi = self.exact
        return [k for k in range(math.floor(lo) + 1, math.ceil(hi)) if lo < k < hi]


def info(p: float) -> float:
    """-log(p)/p, natural log."""
    return -math.log(p) / p


def chi_bounds(p: IPParams) -> ChiBounds:
    ht, hf = float(p.h_true), float(p.h_false)
    exact = (math.log(ht) / math.log(1 - ht), math.log(hf) / math.log(1 - hf))
    stated = (info(ht), 1 / info(1 - hf))
    return ChiBounds(exact, stated)


def exists_integer_in(interval: tuple[float, float]) -> bool:
    lo, hi = interval
    return math.floor(lo) + 1 < hi


# ---------------------------------------------------------------- Hopf-Chernoff


def hc_params(c, eps, delta) -> IPParams:
    c, eps = _q(c), _q(eps)
    if not 0 < eps < c <= 1:
        raise ValueError("need 0 < eps < c <= 1")
    return IPParams(c, c - eps, delta)


def _hc_track(x1, x2, al, be, h):
    g = 1 - h
    return (g * g * x1 + h * g * x2 + h * g * al + h * h * be, h * g * x1 + g * g * x2 + h * h * al + h * g * be)


def hopf_chernoff_step(in1: Belief, in2: Belief, alpha: Belief, beta: Belief, p: IPParams) -> tuple[Belief, Belief]:
    """One copy of the four-interaction block: out = A(h) in + B(h) (alpha, beta)."""
    ta = _hc_track(in1.a, in2.a, alpha.a, beta.a, p.h_true)
    tb = _hc_track(in1.b, in2.b, alpha.b, beta.b, p.h_false)
    return Belief(ta[0], tb[0]), Belief(ta[1], tb[1])


def hopf_chernoff_block(in1: Belief, in2: Belief, alpha: Belief, beta: Belief, p: IPParams) -> tuple[Belief, Belief]:
    """The same step computed interaction by interaction."""
    u1 = interact(in1, alpha, p)
    u2 = interact(in2, beta, p)
    return interact(u1, u2, p), interact(u2, u1, p)


def hopf_chernoff_iterate(in1, in2, alpha, beta, p: IPParams, chi: int) -> tuple[Belief, Belief]:
    for _ in range(chi):
        in1, in2 = hopf_chernoff_step(in1, in2, alpha, beta, p)
    return in1, in2


def hopf_chernoff_network(chi: int) -> TangleMachine:
    """chi concatenated blocks; agents alpha and beta are inputs."""
    b = _beliefs_machine(f"hopf_chernoff_{chi}")
    x1, x2 = b.input("In1"), b.input("In2")
    al, be = b.input("alpha"), b.input("beta")
    for i in range(chi):
        u1 = b.act1(al, BELIEF, x1)
        u2 = b.act1(be, BELIEF, x2)
        x1 = b.act1(u2, BELIEF, u1, f"Out1_{i + 1}")
        x2 = b.act1(u1, BELIEF, u2, f"Out2_{i + 1}")
    b.output(x1, x2)
    return b.build()


def _steady_track(al, be, h):
    if h == 0:
        raise ZeroDivisionError("no unique steady state at h = 0")
    d = 3 - 2 * h
    return (2 * (1 - h) * al + be) / d, (al + 2 * (1 - h) * be) / d


def hopf_chernoff_steady(alpha: Belief, beta: Belief, p: IPParams) -> tuple[Belief, Belief]:
    ta = _steady_track(alpha.a, beta.a, p.h_true)
    tb = _steady_track(alpha.b, beta.b, p.h_false)
    return Belief(ta[0], tb[0]), Belief(ta[1], tb[1])


def hopf_chernoff_beliefs(c, eps, delta) -> tuple[Belief, Belief]:
    """The published agent beliefs with margin eps*delta/12."""
    c, eps, d = _q(c), _q(eps), _q(delta)
    sig = eps * d / 12
    alpha = Belief(Fraction(1, 4) + sig, Fraction(3, 4) - sig)
    beta = Belief(1 - c * d / 2 + sig, c * d / 2 - sig)
    return alpha, beta


def hopf_chernoff_solved_beliefs(c, eps, delta, sigma=None) -> tuple[Belief, Belief]:
    """Agent beliefs solving both steady-state margin equations exactly.

    With alpha = a True + (1-a) False and beta likewise with b, require the
    steady True weight of Out1 to be 1/2 + sigma at h = c delta and
    1/2 - sigma at h = (c - eps) delta.
    """
    c, eps, d = _q(c), _q(eps), _q(delta)
    sig = eps * d / 12 if sigma is None else _q(sigma)
    h1, h2 = c * d, (c - eps) * d
    r1 = (3 - 2 * h1) * (Fraction(1, 2) + sig)
    r2 = (3 - 2 * h2) * (Fraction(1, 2) - sig)
    # r1 = 2(1-h1) a + b, r2 = 2(1-h2) a + b
    a = (r1 - r2) / (2 * (h2 - h1))
    b = r1 - 2 * (1 - h1) * a
    return Belief(a, 1 - a), Belief(b, 1 - b)


def hopf_chernoff_iterations(eps, delta, c=1) -> int:
    """Smallest chi with (1 - h_min)^chi <= eps*delta/24.

    The steady state separates the two cases by sigma = eps*delta/12; half
    of that is left as slack for not having converged yet. The contraction
    factor per block is 1 - h in the max norm.
    """
    c, eps, d = _q(c), _q(eps), _q(delta)
    hmin = min(c * d, (c - eps) * d)
    target = eps * d / 24
    chi, r = 0, Fraction(1)
    while r > target:
        chi += 1
        r *= 1 - hmin
    return chi


def a_matrix(h) -> tuple[tuple[Fraction, Fraction], tuple[Fraction, Fraction]]:
    h = _q(h)
    g = 1 - h
    return ((g * g, h * g), (h * g, g * g))


def a_eigenvalues(h) -> tuple[Fraction, Fraction]:
    """Eigenvalues of the symmetric block matrix: diagonal +- off-diagonal."""
    (p, q), _ = a_matrix(h)
    return p + q, p - q


# ---------------------------------------------------------------- PCP Monte Carlo


def soundness_bound(s) -> Fraction:
    s = _q(s)
    if not 0 < s < 1:
        raise ValueError("s must lie in (0, 1)")
    return 1 / (3 - 2 * s)


@dataclass(frozen=True)
class MCResult:
    accepts: int
    trials: int

    @property
    def rate(self) -> float:
        return self.accepts / self.trials

    @property
    def stderr(self) -> float:
        r = self.rate
        return math.sqrt(max(r * (1 - r), 1e-300) / self.trials)


CHUNK = 8192


def _pcp_chunk(args) -> int:
    seed_seq, n, accept_p, delta, chi = args
    rng = np.random.default_rng(seed_seq)
    alpha = rng.random(n) < 0.5
    top, bottom = alpha, ~alpha
    x1 = rng.random(n) < 0.5
    x2 = rng.random(n) < 0.5

    def meet(patient, agent):
        # certificate accepted and channel passes: adopt the agent's belief
        adopt = (rng.random(n) < accept_p) & (rng.random(n) < delta)
        return np.where(adopt, agent, patient)

    for _ in range(chi):
        u1 = meet(x1, top)
        u2 = meet(x2, bottom)
        x1, x2 = meet(u1, u2), meet(u2, u1)
    return int(np.count_nonzero(x1 == bottom))


def _chunks(trials: int, seed: int):
    ss = np.random.SeedSequence(seed)
    sizes = [CHUNK] * (trials // CHUNK) + ([trials % CHUNK] if trials % CHUNK else [])
    return list(zip(ss.spawn(len(sizes)), sizes))


def pcp_run(
    p: IPParams,
    membership: bool,
    trials: int,
    seed: int,
    chi: int = 20,
    jobs: int = 1,
) -> MCResult:
    """Hopf-Chernoff PCP verifier at certificate level.

    The top agent holds a fair coin alpha and the bottom agent its negation.
    The run accepts when Out1 ends equal to the bottom agent. A patient that
    disagrees with its agent adopts the agent's belief when the certificate
    accepts (probability c, or s for a word outside the language) and the
    channel does not corrupt it (probability delta).
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    accept_p = float(p.c if membership else p.s)
    work = [(ss, n, accept_p, float(p.delta), chi) for ss, n in _chunks(trials, seed)]
    if jobs > 1 and len(work) > 1:
        with ProcessPoolExecutor(max_workers=jobs) as ex:
            counts = list(ex.map(_pcp_chunk, work))
    else:
        counts = [_pcp_chunk(w) for w in work]
    return MCResult(sum(counts), trials)


def pcp_exact(p: IPParams, membership: bool, chi: int = 20) -> Fraction:
    """Exact acceptance probability of :func:`pcp_run`.

    By symmetry take alpha = False; the accept event is Out1 = True and its
    probability evolves linearly under one h.
    """
    h = p.h_true if membership else p.h_false
    x1 = x2 = Fraction(1, 2)
    for _ in range(chi):
        x1, x2 = _hc_track(x1, x2, Fraction(0), Fraction(1), h)
    return x1


# ---------------------------------------------------------------- realization-level simulation


def _true_prob(bel: Belief, membership: bool) -> Fraction:
    return bel.a if membership else 1 - bel.b


def _sources(net: BeliefNetwork) -> dict[int, Belief]:
    src = dict(net.machine.constants)
    src.update(net.beliefs)
    return src


def _fire_order(net: BeliefNetwork) -> list[Interaction]:
    known = set(_sources(net))
    order, pending = [], list(net.machine.interactions)
    while pending:
        rest = [it for it in pending if not (it.agent in known and all(i in known for i, _ in it.patients))]
        fired = [it for it in pending if it not in rest]
        if not fired:
            raise CyclicNetworkError("network has a cycle")
        for it in fired:
            order.append(it)
            known.update(o for _, o in it.patients)
        pending = rest
    return order


def mc_simulate(net: BeliefNetwork, p: IPParams, membership: bool, trials: int, seed: int) -> dict[int, float]:
    """Empirical True frequency of every register over sampled realizations.

    Each register holds one realization. An agent's realization is shared
    by all its patients but the adoption coin is drawn per patient.
    """
    if trials < 1:
        raise ValueError("trials must be positive")
    rng = np.random.default_rng(seed)
    h = float(p.h_true if membership else p.h_false)
    state: dict[int, np.ndarray] = {}
    for r, bel in sorted(_sources(net).items()):
        state[r] = rng.random(trials) < float(_true_prob(bel, membership))
    for it in _fire_order(net):
        y = state[it.agent]
        for i, o in it.patients:
            adopt = rng.random(trials) < h
            state[o] = np.where(adopt, y, state[i])
    return {r: float(np.mean(v)) for r, v in state.items()}


def exact_joint(net: BeliefNetwork, p: IPParams, membership: bool, regs) -> dict[tuple[bool, ...], Fraction]:
    """Exact joint law of the realizations of ``regs`` by enumeration."""
    h = p.h_true if membership else p.h_false
    sources = sorted(_sources(net).items())
    order = _fire_order(net)
    coins = [(it, i, o) for it in order for i, o in it.patients]
    dist: Counter = Counter()
    for init in product((True, False), repeat=len(sources)):
        w0 = Fraction(1)
        state = {}
        for (r, bel), v in zip(sources, init):
            t = _true_prob(bel, membership)
            w0 *= t if v else 1 - t
            state[r] = v
        if w0 == 0:
            continue
        for flips in product((True, False), repeat=len(coins)):
            w = w0
            st = dict(state)
            for (it, i, o), adopt in zip(coins, flips):
                w *= h if adopt else 1 - h
                st[o] = st[it.agent] if adopt else st[i]
            if w:
                dist[tuple(st[r] for r in regs)] += w
    return dict(dist)


def total_variation(d1: Mapping, d2: Mapping) -> Fraction:
    keys = set(d1) | set(d2)
    return sum((abs(d1.get(k, 0) - d2.get(k, 0)) for k in keys), Fraction(0)) / 2


def shared_vs_split_agents(agent: Belief = UNSURE) -> tuple[BeliefNetwork, BeliefNetwork]:
    """One agent over two False patients versus two independent agents."""
    b = _beliefs_machine("shared_agent")
    p1, p2 = b.input("P1"), b.input("P2")
    z = b.const(agent, "Z")
    o1, o2 = b.act(z, BELIEF, p1, p2, names=("O1", "O2"))
    b.output(o1, o2)
    shared = b.build()
    b = _beliefs_machine("split_agents")
    p1, p2 = b.input("P1"), b.input("P2")
    z1, z2 = b.const(agent, "Z1"), b.const(agent, "Z2")
    o1 = b.act1(z1, BELIEF, p1, "O1")
    o2 = b.act1(z2, BELIEF, p2, "O2")
    b.output(o1, o2)
    split = b.build()
    return (
        BeliefNetwork(shared, {r: FALSE for r in shared.inputs}),
        BeliefNetwork(split, {r: FALSE for r in split.inputs}),
    )
