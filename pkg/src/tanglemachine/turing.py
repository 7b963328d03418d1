"""Turing machines compiled to tangle machines over the linear quandle.

Colours are rationals and interactions use x |>_s y = (1-s)x + sy. Wyes
supply max and min. Sub-machines are small builder functions that take
registers and return registers; they are composed into a finite control
unit and a memory unit, and one step of the Turing machine is their
concatenation.

Symbols are 0, 1 and 2 (2 is blank). Head moves are 0, 1, 2 for left,
stay, right, so the pointer update is p' = p + eps - 1.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from fractions import Fraction
from typing import Mapping, Sequence

from .algebra import HALF, LINEAR, NEG, TWO, LinearS
from .colouring import Colouring, propagate
from .diagram import Builder, Interaction, TangleMachine, close

SYMBOLS = (0, 1, 2)
BLANK = 2
DEFAULT_SELECTOR = Fraction(3)


class TMError(ValueError):
    pass


class HeadEscape(TMError):
    """The head left the finite tape."""


# ---------------------------------------------------------------- specs


@dataclass(frozen=True)
class TMSpec:
    n: int
    q0: int
    qh: int
    delta: Mapping[tuple[int, int], tuple[int, int, int]]

    def __post_init__(self) -> None:
        states = range(1, self.n + 1)
        if self.q0 not in states or self.qh not in states:
            raise TMError("q0 and qh must be states 1..n")
        for q in states:
            for u in SYMBOLS:
                if (q, u) not in self.delta:
                    raise TMError(f"delta undefined at ({q}, {u})")
                q2, a, e = self.delta[(q, u)]
                if q2 not in states or a not in SYMBOLS or e not in (0, 1, 2):
                    raise TMError(f"delta({q}, {u}) = {(q2, a, e)} is out of range")
        for u in SYMBOLS:
            if self.delta[(self.qh, u)] != (self.qh, u, 1):
                raise TMError(f"halting state must satisfy delta(qh, {u}) = (qh, {u}, 1)")


@dataclass(frozen=True)
class TMConfig:
    state: int
    tape: tuple[int, ...]
    head: int

    @property
    def scanned(self) -> int:
        return self.tape[self.head - 1]


def parse_tm(text: str) -> TMSpec:
    header = None
    delta: dict[tuple[int, int], tuple[int, int, int]] = {}
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "states" and len(parts) == 4:
                header = tuple(int(v) for v in parts[1:])
            elif parts[0] == "delta" and len(parts) == 7 and parts[3] == "->":
                q, u, q2, a, e = (int(parts[k]) for k in (1, 2, 4, 5, 6))
                if (q, u) in delta:
                    raise TMError(f"delta({q}, {u}) given twice")
                delta[(q, u)] = (q2, a, e)
            else:
                raise TMError(f"cannot parse {line!r}")
        except ValueError as e:
            raise TMError(f"line {ln}: {e}") from None
    if header is None:
        raise TMError("missing `states n q0 qh` line")
    n, q0, qh = header
    return TMSpec(n, q0, qh, delta)


def format_tm(spec: TMSpec) -> str:
    lines = [f"states {spec.n} {spec.q0} {spec.qh}"]
    for (q, u), (q2, a, e) in sorted(spec.delta.items()):
        lines.append(f"delta {q} {u} -> {q2} {a} {e}")
    return "\n".join(lines) + "\n"


def unary_increment() -> TMSpec:
    """Three-state unary incrementer.

    The tape holds a left marker 0, a block of 1s and blanks. State 1 scans
    right and writes a 1 on the first blank, state 2 walks back to the
    marker, state 3 halts.
    """
    d = {
        (1, 0): (1, 0, 2),
        (1, 1): (1, 1, 2),
        (1, 2): (2, 1, 0),
        (2, 0): (3, 0, 1),
        (2, 1): (2, 1, 0),
        (2, 2): (2, 2, 0),
    }
    for u in SYMBOLS:
        d[(3, u)] = (3, u, 1)
    return TMSpec(3, 1, 3, d)


# ---------------------------------------------------------------- reference interpreter


def step_config(spec: TMSpec, cfg: TMConfig) -> TMConfig:
    q2, a, e = spec.delta[(cfg.state, cfg.scanned)]
    tape = list(cfg.tape)
    tape[cfg.head - 1] = a
    head = cfg.head + e - 1
    if not 1 <= head <= len(tape):
        raise HeadEscape(f"head moved to {head}, outside tape 1..{len(tape)}")
    return TMConfig(q2, tuple(tape), head)


def reference_run(spec: TMSpec, config: TMConfig, steps: int) -> TMConfig:
    if not 1 <= config.head <= len(config.tape):
        raise HeadEscape(f"head {config.head} outside tape")
    for _ in range(steps):
        config = step_config(spec, config)
    return config


def reference_trajectory(spec: TMSpec, config: TMConfig, steps: int) -> list[TMConfig]:
    out = [config]
    for _ in range(steps):
        out.append(step_config(spec, out[-1]))
    return out


# ---------------------------------------------------------------- sub-machine pieces


def _k(v) -> Fraction:
    return Fraction(v)


def _scale(b: Builder, x: int, k) -> int:
    """k*x with x as agent: 0 |>_k x."""
    return b.act1(x, LinearS(_k(k)), b.const(_k(0)))


def _neg(b: Builder, x: int) -> int:
    """1 - x (consumes x)."""
    return b.act1(b.const(Fraction(1, 2)), TWO, x)


def _add(b: Builder, x: int, y: int) -> int:
    """x + y; consumes x, uses y as agent."""
    half = b.act1(y, HALF, x)
    return b.act1(half, TWO, b.const(_k(0)))


def _add_const(b: Builder, x: int, k) -> int:
    return _add(b, x, b.const(_k(k)))


def _indicator(b: Builder, x: int) -> int:
    """min(max(x, 0), 1) (consumes x)."""
    lo = b.wye("max", x, b.const(_k(0)))
    return b.wye("min", lo, b.const(_k(1)))


def _beta(b: Builder, x: int) -> int:
    """2*indicator(x) - 1 (consumes x)."""
    i = _indicator(b, x)
    return b.act1(b.const(_k(1)), NEG, i)


def _shifted(b: Builder, c: int, y: int, s: Fraction, sc: int | None = None) -> int:
    """y - s + s*c with c and y as agents."""
    if sc is None:
        sc = _scale(b, c, s)
    k1 = b.act1(y, HALF, b.const(-s))
    k2 = b.act1(k1, TWO, b.const(_k(0)))
    k3 = b.act1(sc, HALF, k2)
    return b.act1(k3, TWO, b.const(_k(0)))


def _selector(b: Builder, c: int, x: int, y: int, s: Fraction) -> int:
    """x when c = 0 and y when c = 1, exact whenever |x - y| <= s."""
    sc = _scale(b, c, s)
    nsc = _scale(b, sc, -1)
    t = b.act1(x, HALF, nsc)
    left = b.act1(t, TWO, b.const(_k(0)))
    right = _shifted(b, c, y, s, sc)
    return b.wye("max", left, right)


def _mask(b: Builder, p: int, positions: Sequence[int]) -> list[int]:
    """One-hot pattern [p == k] over position registers coloured k.

    ``p`` is used only as an agent; the position registers are consumed.
    """
    g = _scale(b, p, -1)
    out = []
    for r in positions:
        h = b.act1(g, HALF, r)
        d = b.act1(h, TWO, b.const(_k(0)))
        n = _scale(b, d, -1)
        dist = b.wye("max", d, n)
        out.append(_indicator(b, _neg(b, dist)))
    return out


def _max_chain(b: Builder, regs: Sequence[int]) -> int:
    acc = regs[0]
    for r in regs[1:]:
        acc = b.wye("max", acc, r)
    return acc


# ---------------------------------------------------------------- public sub-machines


@dataclass(frozen=True)
class SubmachineKind:
    name: str
    s: Fraction = DEFAULT_SELECTOR
    m: int = 0
    i: int = 0
    j: int = 0
    q_bar: int = 0
    a_bar: int = 0
    eps_bar: int = 0

    def __post_init__(self) -> None:
        if self.name not in ("Neg", "Add", "Indicator", "Beta", "Selector", "Mask", "HardwiredTransition"):
            raise ValueError(f"unknown sub-machine {self.name}")
        if self.name == "Selector" and not Fraction(self.s) > 2:
            raise ValueError("selector constant must exceed 2")
        if self.name == "Mask" and self.m < 1:
            raise ValueError("mask length must be positive")


Neg = SubmachineKind("Neg")
Add = SubmachineKind("Add")
Indicator = SubmachineKind("Indicator")
Beta = SubmachineKind("Beta")


def Selector(s=DEFAULT_SELECTOR) -> SubmachineKind:
    return SubmachineKind("Selector", s=Fraction(s))


def Mask(m: int) -> SubmachineKind:
    return SubmachineKind("Mask", m=m)


def HardwiredTransition(i: int, j: int, q_bar: int, a_bar: int, eps_bar: int, n: int = 0) -> SubmachineKind:
    return SubmachineKind("HardwiredTransition", m=n, i=i, j=j, q_bar=q_bar, a_bar=a_bar, eps_bar=eps_bar)


def _hardwired(b: Builder, eq: int, eu: int, q_bar: int, a_bar: int, eps_bar: int) -> tuple[int, int, int]:
    """Raw (q+2, a+2, e+2) when both one-hot flags are 1, negated otherwise."""
    t = b.act1(eq, HALF, b.const(_k(-1)))
    w = b.act1(t, TWO, b.const(_k(0)))
    v = b.act1(eu, HALF, w)
    x = b.act1(v, TWO, b.const(_k(0)))
    beta = _beta(b, x)
    return tuple(_scale(b, beta, val + 2) for val in (q_bar, a_bar, eps_bar))


def build_submachine(kind: SubmachineKind) -> TangleMachine:
    b = Builder(kind.name, "linear")
    if kind.name == "Neg":
        b.output(_neg(b, b.input("x")))
    elif kind.name == "Add":
        x, y = b.input("x"), b.input("y")
        b.output(_add(b, x, y))
    elif kind.name == "Indicator":
        b.output(_indicator(b, b.input("x")))
    elif kind.name == "Beta":
        b.output(_beta(b, b.input("x")))
    elif kind.name == "Selector":
        c, x, y = b.input("c"), b.input("x"), b.input("y")
        b.output(_selector(b, c, x, y, Fraction(kind.s)))
    elif kind.name == "Mask":
        p = b.input("p")
        positions = [b.input(f"pos{k}") for k in range(1, kind.m + 1)]
        mask = _mask(b, p, positions)
        p_copy = _add_const(b, p, 0)
        b.output(p_copy, *mask)
    else:
        # inputs are the state and symbol one-hot flags of strand i and j+1
        eq, eu = b.input("flag_q"), b.input("flag_u")
        b.output(*_hardwired(b, eq, eu, kind.q_bar, kind.a_bar, kind.eps_bar))
    return b.build()


def hardwired_raw(spec_entry: tuple[int, int, int], matched: bool) -> tuple[int, int, int]:
    q2, a, e = spec_entry
    sign = 1 if matched else -1
    return (sign * (q2 + 2), sign * (a + 2), sign * (e + 2))


# ---------------------------------------------------------------- finite control and memory


def _finite_control(b: Builder, spec: TMSpec, q: int, u: int) -> tuple[int, int, int]:
    eq = _mask(b, q, [b.const(_k(k)) for k in range(1, spec.n + 1)])
    # symbol j is matched on mask strand j + 1
    u1 = _add_const(b, u, 1)
    eu = _mask(b, u1, [b.const(_k(k)) for k in range(1, 4)])
    raws = []
    for i in range(1, spec.n + 1):
        for j in SYMBOLS:
            q_bar, a_bar, eps_bar = spec.delta[(i, j)]
            raws.append(_hardwired(b, eq[i - 1], eu[j], q_bar, a_bar, eps_bar))
    combined = [_max_chain(b, [r[c] for r in raws]) for c in range(3)]
    return tuple(_add_const(b, v, -2) for v in combined)


def build_finite_control(spec: TMSpec) -> TangleMachine:
    b = Builder("finite_control", "linear")
    q, u = b.input("q"), b.input("u")
    q2, a, e = _finite_control(b, spec, q, u)
    b.names.update({q2: "q_next", a: "a", e: "eps"})
    b.output(q2, a, e)
    return b.build()


def _memory(b: Builder, m: int, p: int, cells: Sequence[int], a: int, e: int, s: Fraction):
    mask = _mask(b, p, [b.const(_k(k)) for k in range(1, m + 1)])
    new_cells = [_selector(b, mask[k], cells[k], a, s) for k in range(m)]
    p_next = _add_const(b, _add(b, p, e), -1)
    read_mask = _mask(b, p_next, [b.const(_k(k)) for k in range(1, m + 1)])
    u_next = _max_chain(b, [_shifted(b, read_mask[k], new_cells[k], s) for k in range(m)])
    # closed strut coloured 0: consistent only if exactly one cell is read
    total = b.const(_k(0))
    for flag in read_mask:
        total = _add(b, total, flag)
    guard = b.const(_k(0), name="guard")
    half_turn = b.reg()
    b.interactions.append(_inter(total, TWO, guard, half_turn))
    b.interactions.append(_inter(b.const(_k(1)), TWO, half_turn, guard))
    return p_next, new_cells, u_next


def _inter(agent: int, op, i: int, o: int) -> Interaction:
    return Interaction(agent, op, ((i, o),))


def build_memory_unit(m: int, s: Fraction = DEFAULT_SELECTOR) -> TangleMachine:
    if m < 1:
        raise ValueError("tape length must be positive")
    b = Builder("memory", "linear")
    p = b.input("p")
    cells = [b.input(f"c{k}") for k in range(1, m + 1)]
    a, e = b.input("a"), b.input("eps")
    p2, new_cells, u2 = _memory(b, m, p, cells, a, e, Fraction(s))
    b.names[p2] = "p_next"
    b.names[u2] = "u_next"
    for k, r in enumerate(new_cells, 1):
        b.names[r] = f"c{k}_next"
    b.output(p2, *new_cells, u2)
    return b.build()


STATE_FIELDS = ("q", "u", "p")


def build_step(spec: TMSpec, m: int, s: Fraction = DEFAULT_SELECTOR) -> TangleMachine:
    """One Turing step: (q, u, p, c1..cm) -> the same tuple one step later."""
    b = Builder("tm_step", "linear")
    q, u, p = b.input("q_in"), b.input("u_in"), b.input("p_in")
    cells = [b.input(f"c{k}_in") for k in range(1, m + 1)]
    q2, a, e = _finite_control(b, spec, q, u)
    p2, new_cells, u2 = _memory(b, m, p, cells, a, e, Fraction(s))
    outs = [q2, u2, p2] + list(new_cells)
    labels = ["q_out", "u_out", "p_out"] + [f"c{k}_out" for k in range(1, m + 1)]
    for r, label in zip(outs, labels):
        b.names[r] = label
    b.output(*outs)
    return b.build()


def compile_tm(spec: TMSpec, m: int, steps: int, closed: bool = False, s: Fraction = DEFAULT_SELECTOR) -> TangleMachine:
    """Concatenate ``steps`` one-step units; optionally close the loop."""
    if m < 1 or steps < 1:
        raise ValueError("tape length and step count must be positive")
    unit = build_step(spec, m, s)
    b = Builder(f"tm_{spec.n}states_m{m}_N{steps}", "linear")
    state = [b.input(f"s0.{unit.names[r]}") for r in unit.inputs]
    for k in range(steps):
        mp = b.embed(unit, feed=dict(zip(unit.inputs, state)), prefix=f"s{k}.")
        state = [mp[r] for r in unit.outputs]
    b.output(*state)
    machine = b.build()
    if closed:
        machine = close(machine, list(zip(machine.outputs, machine.inputs)))
    return machine


def state_registers(machine: TangleMachine, m: int, t: int) -> list[int]:
    """Registers holding (q, u, p, c1..cm) after ``t`` steps."""
    labels = ["q", "u", "p"] + [f"c{k}" for k in range(1, m + 1)]
    if t == 0:
        return [machine.register_named(f"s0.{x}_in") for x in labels]
    return [machine.register_named(f"s{t - 1}.{x}_out") for x in labels]


def config_colours(config: TMConfig) -> list[Fraction]:
    return [_k(config.state), _k(config.scanned), _k(config.head)] + [_k(c) for c in config.tape]


def run_compiled(machine: TangleMachine, config: TMConfig) -> Colouring:
    return propagate(machine, LINEAR, dict(zip(machine.inputs, config_colours(config))))


def read_config(colouring: Colouring, regs: Sequence[int]) -> TMConfig:
    vals = [colouring.values[r] for r in regs]
    for v in vals:
        if v.denominator != 1:
            raise TMError(f"non-integer register colour {v}")
    ints = [int(v) for v in vals]
    return TMConfig(ints[0], tuple(ints[3:]), ints[2])


def compiled_trajectory(spec: TMSpec, config: TMConfig, steps: int) -> tuple[Colouring, list[TMConfig]]:
    m = len(config.tape)
    machine = compile_tm(spec, m, steps)
    col = run_compiled(machine, config)
    if col.status != "Determined":
        return col, []
    return col, [read_config(col, state_registers(machine, m, t)) for t in range(steps + 1)]


def seed_closed(machine: TangleMachine, m: int, steps: int, config: TMConfig) -> Colouring:
    """Propagate a closed machine seeded with ``config`` on its loop registers."""
    regs = state_registers(machine, m, steps)
    return propagate(machine, LINEAR, {}, dict(zip(regs, config_colours(config))))


def op_count(spec: TMSpec, m: int = 2) -> int:
    """Number of distinct operations in the compiled machine."""
    return len(build_step(spec, m).ops())


def overhead_ops(s: Fraction = DEFAULT_SELECTOR) -> frozenset:
    """Operations used outside the hardwired transition blocks."""
    return frozenset({HALF, TWO, NEG, LinearS(_k(-1)), LinearS(Fraction(s))})


# one global constant: op_count(spec) <= 9 n + OP_COUNT_K for every spec
OP_COUNT_K = len(overhead_ops())


def random_spec(n: int, rng) -> TMSpec:
    """Random total transition table with a proper halting state n."""
    d = {}
    for q in range(1, n + 1):
        for u in SYMBOLS:
            d[(q, u)] = (q, u, 1) if q == n else (rng.randint(1, n), rng.choice(SYMBOLS), rng.choice((0, 1, 2)))
    return TMSpec(n, 1, n, d)


def with_tape(config: TMConfig, **changes) -> TMConfig:
    return replace(config, **changes)
