"""Logic gates as tangle machines and a boolean circuit compiler.

Two realizations are provided. The quagma backend colours registers with
2x2 rational matrices, encoding bit 0 as ``A0`` and bit 1 as ``A1``. The
Fox-3 backend colours with residues, encoding bits as ``f0``/``f1`` and
using a min-wye for AND.
"""

from __future__ import annotations

import re
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from importlib import resources
from typing import Sequence

from .algebra import FOX3, HALF, MIXED2X2, TWO, ConjGuarded, Fox3, Fox3Op, Mat, Quagma
from .colouring import evaluate_io
from .diagram import Builder, TangleMachine, parse, serialize

A0 = Mat.of([[0, 1], [1, 0]])
A1 = Mat.of([[1, 0], [0, -1]])
A0_PLUS_A1 = A0 + A1
ZERO = Mat.zero(2)

GCONJ = ConjGuarded()
FOX = Fox3Op()

BACKENDS = ("quagma", "fox3")


class CircuitError(ValueError):
    pass


class DecodeError(RuntimeError):
    """An output colour is not a bit encoding; signals a compiler bug."""


def backend_quagma(backend: str) -> Quagma:
    if backend == "quagma":
        return MIXED2X2
    if backend == "fox3":
        return FOX3
    raise ValueError(f"unknown backend {backend!r}")


def encode(bit: int, backend: str):
    if bit not in (0, 1):
        raise ValueError(f"not a bit: {bit!r}")
    if backend == "quagma":
        return A1 if bit else A0
    return Fox3(bit)


def decode(colour, backend: str) -> int:
    table = {A0: 0, A1: 1} if backend == "quagma" else {Fox3(0): 0, Fox3(1): 1}
    try:
        return table[colour]
    except (KeyError, TypeError):
        raise DecodeError(f"colour {colour} is not a bit encoding") from None


# ---------------------------------------------------------------- gate kinds


@dataclass(frozen=True)
class GateKind:
    name: str
    n: int = 0

    def __post_init__(self) -> None:
        if self.name not in ("NotQ", "AndQ", "MuxQ", "NotF3", "AndF3", "MuxF3"):
            raise ValueError(f"unknown gate {self.name}")
        if self.name.startswith("Mux") and self.n < 2:
            raise ValueError("multiplexers need n >= 2")


NotQ = GateKind("NotQ")
AndQ = GateKind("AndQ")
NotF3 = GateKind("NotF3")
AndF3 = GateKind("AndF3")


def MuxQ(n: int) -> GateKind:
    return GateKind("MuxQ", n)


def MuxF3(n: int) -> GateKind:
    return GateKind("MuxF3", n)


def _not_q(b: Builder, x: int) -> int:
    s = b.const(A0_PLUS_A1)
    return b.act1(s, GCONJ, x)


def _and_q(b: Builder, x: int, y: int, tag: str = "") -> int:
    m = b.act1(y, HALF, x)
    s1 = b.const(A0_PLUS_A1)
    beta1 = b.act1(m, GCONJ, s1, name=tag + "beta1")
    s2 = b.const(A0_PLUS_A1)
    beta2 = b.act1(s2, HALF, beta1, name=tag + "beta2")
    a0 = b.const(A0)
    t = b.act1(a0, GCONJ, beta2)
    beta3 = b.act1(beta2, HALF, t, name=tag + "beta3")
    a1 = b.const(A1)
    u = b.act1(a1, HALF, beta3)
    a1b = b.const(A1)
    return b.act1(u, GCONJ, a1b)


def _not_f3(b: Builder, x: int) -> int:
    two = b.const(Fox3(2))
    return b.act1(two, FOX, x)


def _and_f3(b: Builder, x: int, y: int) -> int:
    return b.wye("min", x, y)


@lru_cache(maxsize=None)
def mux_core(backend: str) -> TangleMachine:
    """The committed two-way multiplexer wiring for a backend."""
    fname = "mux_quagma.tm" if backend == "quagma" else "mux_fox3.tm"
    text = resources.files("tanglemachine.assets").joinpath(fname).read_text()
    return parse(text)


def _mux(b: Builder, backend: str, x: int, zeros: Sequence[int]) -> list[int]:
    """Cascade the two-way core so (X, 0, ..., 0) -> (X, ..., X)."""
    core = mux_core(backend)
    copies: list[int] = []
    current = x
    for z in zeros:
        mp = b.embed(core, feed={core.inputs[0]: current, core.inputs[1]: z})
        current = mp[core.outputs[0]]
        copies.append(mp[core.outputs[1]])
    return [current] + copies


def build_gate(kind: GateKind) -> TangleMachine:
    b = Builder(kind.name + (str(kind.n) if kind.n else ""), "mixed2x2" if kind.name.endswith("Q") else "fox3")
    if kind.name == "NotQ":
        b.output(_not_q(b, b.input("x")))
    elif kind.name == "AndQ":
        x, y = b.input("x"), b.input("y")
        b.output(_and_q(b, x, y))
    elif kind.name == "NotF3":
        b.output(_not_f3(b, b.input("x")))
    elif kind.name == "AndF3":
        x, y = b.input("x"), b.input("y")
        b.output(_and_f3(b, x, y))
    else:
        backend = "quagma" if kind.name == "MuxQ" else "fox3"
        x = b.input("x")
        zeros = [b.input(f"z{k}") for k in range(1, kind.n)]
        b.output(*_mux(b, backend, x, zeros))
    return b.build()


# ---------------------------------------------------------------- multiplexer search


def search_mux_wiring(backend: str, max_interactions: int = 4) -> list[tuple[int, str, int, int]] | None:
    """Bounded search for a two-way multiplexer over the backend's operations.

    Registers 0 and 1 carry X and 0. Every colour stays a multiple of X, so
    the search tracks coefficients. Returns (agent, op, patient, result)
    tuples for the first wiring found with the fewest interactions.
    """
    if backend == "quagma":
        ops = [("lin:1/2", lambda a, y: (a + y) / 2), ("lin:2", lambda a, y: 2 * y - a)]
        norm = lambda v: v  # noqa: E731
    else:
        ops = [("fox3", lambda a, y: 2 * y - a)]
        norm = lambda v: v % 3  # noqa: E731

    def dfs(depth, regs, ends, inters, touched):
        if len(inters) == depth:
            if all(touched) and all(regs[e] == 1 for e in ends):
                return list(inters)
            return None
        for s in range(2):
            p = ends[s]
            for a in range(len(regs)):
                if a == p:
                    continue
                for name, f in ops:
                    regs.append(norm(f(regs[p], regs[a])))
                    new_ends = list(ends)
                    new_ends[s] = len(regs) - 1
                    new_touched = list(touched)
                    new_touched[s] = True
                    inters.append((a, name, p, len(regs) - 1))
                    found = dfs(depth, regs, new_ends, inters, new_touched)
                    if found:
                        return found
                    inters.pop()
                    regs.pop()
        return None

    for depth in range(1, max_interactions + 1):
        found = dfs(depth, [Fraction(1), Fraction(0)], [0, 1], [], [False, False])
        if found:
            return found
    return None


def mux_from_wiring(backend: str, wiring: Sequence[tuple[int, str, int, int]]) -> TangleMachine:
    """Machine text for a searched wiring (strand 0 carries X, strand 1 the zero)."""
    n_regs = 2 + len(wiring)
    ends = [0, 1]
    for _, _, p, r in wiring:
        ends[ends.index(p)] = r
    lines = ["machine mux2", f"quagma {'mixed2x2' if backend == 'quagma' else 'fox3'}"]
    for r in range(n_regs):
        tag = " in" if r in (0, 1) else " out" if r in ends else ""
        lines.append(f"reg {r}{tag}")
    if ends != sorted(ends):
        lines.append("order out " + " ".join(map(str, ends)))
    for a, op, p, r in wiring:
        lines.append(f"inter {a} {op} {p}->{r}")
    return parse("\n".join(lines) + "\n")


# ---------------------------------------------------------------- circuits


@dataclass(frozen=True)
class Node:
    kind: str
    args: tuple[str, ...]
    targets: tuple[str, ...]


@dataclass(frozen=True)
class Circuit:
    inputs: tuple[str, ...]
    nodes: tuple[Node, ...]
    outputs: tuple[str, ...]

    def __post_init__(self) -> None:
        defined = set(self.inputs)
        if len(defined) != len(self.inputs):
            raise CircuitError("repeated input name")
        arity = {"NOT": 1, "AND": 2, "OR": 2, "FANOUT": 1}
        for node in self.nodes:
            if node.kind not in arity:
                raise CircuitError(f"unknown gate {node.kind}")
            if len(node.args) != arity[node.kind]:
                raise CircuitError(f"{node.kind} takes {arity[node.kind]} arguments")
            for a in node.args:
                if a not in defined:
                    raise CircuitError(f"signal {a!r} used before definition")
            if node.kind == "FANOUT" and len(node.targets) < 2:
                raise CircuitError("FANOUT needs at least two targets")
            if node.kind != "FANOUT" and len(node.targets) != 1:
                raise CircuitError(f"{node.kind} defines exactly one signal")
            for t in node.targets:
                if t in defined:
                    raise CircuitError(f"signal {t!r} defined twice")
                defined.add(t)
        for o in self.outputs:
            if o not in defined:
                raise CircuitError(f"output {o!r} is not defined")

    def evaluate(self, bits: Sequence[int]) -> tuple[int, ...]:
        """Reference boolean semantics."""
        env = dict(zip(self.inputs, bits))
        for node in self.nodes:
            vals = [env[a] for a in node.args]
            if node.kind == "NOT":
                env[node.targets[0]] = 1 - vals[0]
            elif node.kind == "AND":
                env[node.targets[0]] = vals[0] & vals[1]
            elif node.kind == "OR":
                env[node.targets[0]] = vals[0] | vals[1]
            else:
                for t in node.targets:
                    env[t] = vals[0]
        return tuple(env[o] for o in self.outputs)


_NAME = r"[A-Za-z_][A-Za-z0-9_.]*"


def parse_circuit(text: str) -> Circuit:
    inputs: list[str] = []
    nodes: list[Node] = []
    outputs: list[str] = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        try:
            if parts[0] == "in":
                inputs.extend(parts[1:])
            elif parts[0] == "out":
                outputs.extend(parts[1:])
            elif "=" in parts:
                k = parts.index("=")
                targets, rhs = parts[:k], parts[k + 1:]
                if not rhs or not targets or not all(re.fullmatch(_NAME, t) for t in targets):
                    raise CircuitError("malformed assignment")
                nodes.append(Node(rhs[0].upper(), tuple(rhs[1:]), tuple(targets)))
            else:
                raise CircuitError(f"cannot parse {line!r}")
        except CircuitError as e:
            raise CircuitError(f"line {ln}: {e}") from None
    try:
        return Circuit(tuple(inputs), tuple(nodes), tuple(outputs))
    except CircuitError as e:
        raise CircuitError(f"circuit: {e}") from None


def format_circuit(c: Circuit) -> str:
    lines = ["in " + " ".join(c.inputs)]
    for node in c.nodes:
        lines.append(" ".join(node.targets) + " = " + " ".join((node.kind,) + node.args))
    lines.append("out " + " ".join(c.outputs))
    return "\n".join(lines) + "\n"


def compile_circuit(c: Circuit, backend: str) -> TangleMachine:
    """Lower a circuit to a machine; repeated uses go through multiplexers."""
    if backend not in BACKENDS:
        raise ValueError(f"unknown backend {backend!r}")
    uses: dict[str, int] = {}
    for node in c.nodes:
        for a in node.args:
            uses[a] = uses.get(a, 0) + 1
    for o in c.outputs:
        uses[o] = uses.get(o, 0) + 1

    b = Builder("circuit", "mixed2x2" if backend == "quagma" else "fox3")
    zero = ZERO if backend == "quagma" else Fox3(0)
    pending: dict[str, list[int]] = {}

    def define(name: str, reg: int) -> None:
        n = uses.get(name, 0)
        if n <= 1:
            pending[name] = [reg]
        else:
            pending[name] = _mux(b, backend, reg, [b.const(zero) for _ in range(n - 1)])

    def take(name: str) -> int:
        return pending[name].pop()

    not_ = _not_q if backend == "quagma" else _not_f3
    and_ = _and_q if backend == "quagma" else _and_f3
    for name in c.inputs:
        define(name, b.input(name))
    for node in c.nodes:
        args = [take(a) for a in node.args]
        if node.kind == "NOT":
            define(node.targets[0], not_(b, args[0]))
        elif node.kind == "AND":
            define(node.targets[0], and_(b, args[0], args[1]))
        elif node.kind == "OR":
            define(node.targets[0], not_(b, and_(b, not_(b, args[0]), not_(b, args[1]))))
        else:
            copies = _mux(b, backend, args[0], [b.const(zero) for _ in node.targets[1:]])
            for t, r in zip(node.targets, copies):
                # each FANOUT target is itself a signal that may be reused
                n = uses.get(t, 0)
                if n <= 1:
                    pending[t] = [r]
                else:
                    pending[t] = _mux(b, backend, r, [b.const(zero) for _ in range(n - 1)])
    inputs = set(b.inputs)
    for o in c.outputs:
        r = take(o)
        if r in inputs:
            # an output must be produced inside the machine
            r = not_(b, not_(b, r))
        b.output(r)
    return b.build()


def eval_bits(m: TangleMachine, backend: str, bits: Sequence[int]) -> tuple[int, ...]:
    colours = [encode(v, backend) for v in bits]
    out = evaluate_io(m, backend_quagma(backend), colours)
    return tuple(decode(x, backend) for x in out)


def truth_table_circuit(table: Sequence[int], names: Sequence[str] = ("x", "y")) -> Circuit:
    """Sum-of-minterms circuit for a two-input boolean function.

    ``table[k]`` is the output for (x, y) = (k >> 1 & 1, k & 1).
    """
    x, y = names
    lines = [f"in {x} {y}"]
    minterms = [k for k in range(4) if table[k]]
    if not minterms:
        lines += [f"nx = NOT {x}", f"f = AND {x} nx", "out f"]
        return parse_circuit("\n".join(lines))
    terms = []
    for k in minterms:
        lits = []
        for name, bit in ((x, k >> 1 & 1), (y, k & 1)):
            if bit:
                lits.append(name)
            else:
                lines.append(f"n{name}{k} = NOT {name}")
                lits.append(f"n{name}{k}")
        lines.append(f"t{k} = AND {lits[0]} {lits[1]}")
        terms.append(f"t{k}")
    acc = terms[0]
    for j, t in enumerate(terms[1:]):
        lines.append(f"o{j} = OR {acc} {t}")
        acc = f"o{j}"
    lines.append(f"out {acc}")
    return parse_circuit("\n".join(lines))


HALF_ADDER = """\
in x y
ny = NOT y
nx = NOT x
a = AND x ny
b = AND nx y
sum = OR a b
carry = AND x y
out sum carry
"""


def half_adder() -> Circuit:
    return parse_circuit(HALF_ADDER)


def serialize_gate(kind: GateKind) -> str:
    return serialize(build_gate(kind))
