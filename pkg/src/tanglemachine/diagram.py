"""Tangle machine intermediate representation.

A machine is a set of integer registers joined by interactions (one agent
acting on an ordered list of patient in/out pairs) and wyes (max/min
trivalent vertices). Inputs and outputs are ordered tuples of registers.
Pre-coloured registers (constants) model agents whose colour is fixed by
construction, such as the ``A0 + A1`` register of the quagma NOT gate.
"""

from __future__ import annotations

import heapq
from dataclasses import dataclass, field, replace
from typing import Iterable, Mapping, Sequence

from .algebra import (
    Colour,
    OpLabel,
    format_colour,
    invert,
    parse_colour,
    parse_op,
    KindError,
)


class DiagramError(ValueError):
    """Structural problem with a machine or a binding."""


class ParseError(ValueError):
    def __init__(self, line: int, reason: str) -> None:
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


@dataclass(frozen=True)
class Interaction:
    agent: int
    op: OpLabel
    patients: tuple[tuple[int, int], ...]


@dataclass(frozen=True)
class Wye:
    mode: str
    in1: int
    in2: int
    out: int


@dataclass(frozen=True)
class TangleMachine:
    registers: tuple[int, ...]
    interactions: tuple[Interaction, ...] = ()
    wyes: tuple[Wye, ...] = ()
    inputs: tuple[int, ...] = ()
    outputs: tuple[int, ...] = ()
    constants: Mapping[int, Colour] = field(default_factory=dict)
    names: Mapping[int, str] = field(default_factory=dict)
    name: str = "machine"
    quagma: str = ""

    def __hash__(self) -> int:
        return hash(serialize(self))

    # ------------------------------------------------------------ queries

    def producers(self) -> dict[int, tuple[str, int]]:
        """Map each produced register to ("inter", index) or ("wye", index)."""
        out: dict[int, tuple[str, int]] = {}
        for k, it in enumerate(self.interactions):
            for _, o in it.patients:
                out.setdefault(o, ("inter", k))
        for k, w in enumerate(self.wyes):
            out.setdefault(w.out, ("wye", k))
        return out

    def register_named(self, label: str) -> int:
        for r, n in self.names.items():
            if n == label:
                return r
        raise KeyError(label)

    def ops(self) -> set[OpLabel]:
        return {it.op for it in self.interactions}

    def next_id(self) -> int:
        return max(self.registers, default=-1) + 1

    def dependencies(self) -> dict[int, set[int]]:
        """Registers each register is computed from (forward direction)."""
        deps: dict[int, set[int]] = {r: set() for r in self.registers}
        for it in self.interactions:
            for i, o in it.patients:
                deps[o] |= {i, it.agent}
        for w in self.wyes:
            deps[w.out] |= {w.in1, w.in2}
        return deps

    def downstream(self, start: int) -> set[int]:
        """Registers whose forward computation depends on ``start``."""
        users: dict[int, set[int]] = {r: set() for r in self.registers}
        for r, ds in self.dependencies().items():
            for d in ds:
                users[d].add(r)
        seen: set[int] = set()
        stack = [start]
        while stack:
            r = stack.pop()
            for u in users[r]:
                if u not in seen:
                    seen.add(u)
                    stack.append(u)
        return seen


@dataclass(frozen=True)
class Report:
    violations: tuple[str, ...]

    @property
    def ok(self) -> bool:
        return not self.violations

    def __str__(self) -> str:
        return "ok" if self.ok else "; ".join(self.violations)


def validate(m: TangleMachine) -> Report:
    """Check well-formedness; violations name the offending registers."""
    v: list[str] = []
    regs = set(m.registers)
    if len(regs) != len(m.registers):
        v.append("duplicate register ids")

    def known(r: int, what: str) -> None:
        if r not in regs:
            v.append(f"{what} references unknown register {r}")

    produced: dict[int, int] = {}
    consumed: dict[int, int] = {}
    for it in m.interactions:
        known(it.agent, "interaction agent")
        if not it.patients:
            v.append(f"interaction with agent {it.agent} has no patients")
        for i, o in it.patients:
            known(i, "patient")
            known(o, "patient")
            if i == o:
                v.append(f"patient pair {i}->{o} does not change register")
            produced[o] = produced.get(o, 0) + 1
            consumed[i] = consumed.get(i, 0) + 1
    for w in m.wyes:
        if w.mode not in ("max", "min"):
            v.append(f"wye mode {w.mode!r} is not max or min")
        for r in (w.in1, w.in2, w.out):
            known(r, "wye")
        if w.out in (w.in1, w.in2):
            v.append(f"wye output {w.out} equals one of its inputs")
        if w.in1 == w.in2:
            v.append(f"wye inputs coincide at {w.in1}")
        produced[w.out] = produced.get(w.out, 0) + 1
        consumed[w.in1] = consumed.get(w.in1, 0) + 1
        consumed[w.in2] = consumed.get(w.in2, 0) + 1
    for r, n in sorted(produced.items()):
        if n > 1:
            v.append(f"multiply-produced register {r}")
    for r, n in sorted(consumed.items()):
        if n > 1:
            v.append(f"multiply-consumed register {r}")
    ins, outs = set(m.inputs), set(m.outputs)
    if len(ins) != len(m.inputs) or len(outs) != len(m.outputs):
        v.append("repeated register in inputs or outputs")
    for r in sorted(ins & outs):
        v.append(f"register {r} is both input and output")
    for r in sorted(ins):
        known(r, "input")
        if r in produced:
            v.append(f"input register {r} is produced inside the machine")
        if r in m.constants:
            v.append(f"input register {r} is also a constant")
    for r in sorted(outs):
        known(r, "output")
    for r in sorted(m.constants):
        known(r, "constant")
    return Report(tuple(v))


def require_valid(m: TangleMachine) -> None:
    rep = validate(m)
    if not rep.ok:
        raise DiagramError(str(rep))


# ---------------------------------------------------------------- builder


class Builder:
    """Mutable helper for assembling machines register by register."""

    def __init__(self, name: str = "machine", quagma: str = "") -> None:
        self.name = name
        self.quagma = quagma
        self._next = 0
        self.registers: list[int] = []
        self.interactions: list[Interaction] = []
        self.wyes: list[Wye] = []
        self.inputs: list[int] = []
        self.outputs: list[int] = []
        self.constants: dict[int, Colour] = {}
        self.names: dict[int, str] = {}

    def reg(self, name: str | None = None) -> int:
        r = self._next
        self._next += 1
        self.registers.append(r)
        if name is not None:
            self.names[r] = name
        return r

    def input(self, name: str | None = None) -> int:
        r = self.reg(name)
        self.inputs.append(r)
        return r

    def const(self, colour: Colour, name: str | None = None) -> int:
        r = self.reg(name)
        self.constants[r] = colour
        return r

    def act(self, agent: int, op: OpLabel, *patients: int, names: Sequence[str | None] = ()) -> list[int]:
        """Pass ``patients`` under ``agent``; returns the new registers."""
        pairs = []
        outs = []
        for k, p in enumerate(patients):
            o = self.reg(names[k] if k < len(names) else None)
            pairs.append((p, o))
            outs.append(o)
        self.interactions.append(Interaction(agent, op, tuple(pairs)))
        return outs

    def act1(self, agent: int, op: OpLabel, patient: int, name: str | None = None) -> int:
        return self.act(agent, op, patient, names=(name,))[0]

    def wye(self, mode: str, a: int, b: int, name: str | None = None) -> int:
        o = self.reg(name)
        self.wyes.append(Wye(mode, a, b, o))
        return o

    def output(self, *regs: int) -> None:
        self.outputs.extend(regs)

    def embed(self, m: TangleMachine, feed: Mapping[int, int] | None = None, prefix: str = "") -> dict[int, int]:
        """Copy ``m`` into this builder, wiring its inputs from ``feed``.

        Returns the map from ``m`` registers to builder registers. Inputs of
        ``m`` absent from ``feed`` become builder inputs.
        """
        feed = dict(feed or {})
        mapping: dict[int, int] = {}
        for r in m.registers:
            if r in feed:
                mapping[r] = feed[r]
            else:
                label = m.names.get(r)
                mapping[r] = self.reg(prefix + label if label is not None else None)
        for r in m.inputs:
            if r not in feed:
                self.inputs.append(mapping[r])
        for r, c in m.constants.items():
            self.constants[mapping[r]] = c
        for it in m.interactions:
            self.interactions.append(
                Interaction(mapping[it.agent], it.op, tuple((mapping[i], mapping[o]) for i, o in it.patients))
            )
        for w in m.wyes:
            self.wyes.append(Wye(w.mode, mapping[w.in1], mapping[w.in2], mapping[w.out]))
        return mapping

    def build(self, check: bool = True) -> TangleMachine:
        m = TangleMachine(
            registers=tuple(self.registers),
            interactions=tuple(self.interactions),
            wyes=tuple(self.wyes),
            inputs=tuple(self.inputs),
            outputs=tuple(self.outputs),
            constants=dict(self.constants),
            names=dict(self.names),
            name=self.name,
            quagma=self.quagma,
        )
        if check:
            require_valid(m)
        return m


# ---------------------------------------------------------------- composition


def rename(m: TangleMachine, mapping: Mapping[int, int]) -> TangleMachine:
    """Apply a register renaming (not necessarily injective)."""
    f = lambda r: mapping.get(r, r)  # noqa: E731
    regs = tuple(dict.fromkeys(f(r) for r in m.registers))
    return replace(
        m,
        registers=regs,
        interactions=tuple(
            Interaction(f(it.agent), it.op, tuple((f(i), f(o)) for i, o in it.patients)) for it in m.interactions
        ),
        wyes=tuple(Wye(w.mode, f(w.in1), f(w.in2), f(w.out)) for w in m.wyes),
        inputs=tuple(f(r) for r in m.inputs),
        outputs=tuple(f(r) for r in m.outputs),
        constants={f(r): c for r, c in m.constants.items()},
        names={f(r): n for r, n in m.names.items()},
    )


def concat(m1: TangleMachine, m2: TangleMachine, binding: Iterable[tuple[int, int]]) -> TangleMachine:
    """Join ``m1`` outputs to ``m2`` inputs; bound registers are identified."""
    pairs = list(binding)
    outs = [a for a, _ in pairs]
    ins = [b for _, b in pairs]
    if len(set(outs)) != len(outs) or len(set(ins)) != len(ins):
        raise DiagramError("binding is not injective")
    for a in outs:
        if a not in m1.outputs:
            raise DiagramError(f"binding references missing output register {a} of the first machine")
    for b in ins:
        if b not in m2.inputs:
            raise DiagramError(f"binding references missing input register {b} of the second machine")
    offset = m1.next_id()
    shifted = rename(m2, {r: r + offset for r in m2.registers})
    bind = {b + offset: a for a, b in pairs}
    shifted = rename(shifted, bind)
    regs = list(m1.registers) + [r for r in shifted.registers if r not in set(m1.registers)]
    names = dict(m1.names)
    for r, n in shifted.names.items():
        if r not in names:
            names[r] = n
    merged = TangleMachine(
        registers=tuple(regs),
        interactions=m1.interactions + shifted.interactions,
        wyes=m1.wyes + shifted.wyes,
        inputs=m1.inputs + tuple(r for r in shifted.inputs if r not in set(bind.values())),
        outputs=tuple(r for r in m1.outputs if r not in set(outs)) + shifted.outputs,
        constants={**m1.constants, **shifted.constants},
        names=names,
        name=m1.name,
        quagma=m1.quagma or m2.quagma,
    )
    require_valid(merged)
    return merged


def close(m: TangleMachine, pairs: Iterable[tuple[int, int]]) -> TangleMachine:
    """Feed outputs back into inputs, identifying each (output, input) pair."""
    pairs = list(pairs)
    for o, i in pairs:
        if o not in m.outputs or i not in m.inputs:
            raise DiagramError(f"cannot close {o}->{i}: not an output/input pair")
    mapping = {i: o for o, i in pairs}
    closed = rename(m, mapping)
    fed = {o for o, _ in pairs}
    closed = replace(
        closed,
        inputs=tuple(r for r in closed.inputs if r not in fed),
        outputs=tuple(r for r in closed.outputs if r not in fed),
    )
    require_valid(closed)
    return closed


# ---------------------------------------------------------------- canonical form


def canonical_order(m: TangleMachine) -> list[int]:
    """Topological order of registers; inputs first, ties by creation order."""
    position = {r: k for k, r in enumerate(m.registers)}
    in_pos = {r: k for k, r in enumerate(m.inputs)}
    deps = m.dependencies()
    users: dict[int, list[int]] = {r: [] for r in m.registers}
    for r, ds in deps.items():
        for d in ds:
            users[d].append(r)
    indeg = {r: len(ds) for r, ds in deps.items()}

    def key(r: int) -> tuple[int, int]:
        return (0, in_pos[r]) if r in in_pos else (1, position[r])

    heap = [(key(r), r) for r in m.registers if indeg[r] == 0]
    heapq.heapify(heap)
    order: list[int] = []
    done: set[int] = set()
    while len(order) < len(m.registers):
        if not heap:
            # cycle: release the earliest-created pending register
            r = min((r for r in m.registers if r not in done), key=key)
            heapq.heappush(heap, (key(r), r))
            indeg[r] = 0
        _, r = heapq.heappop(heap)
        if r in done:
            continue
        done.add(r)
        order.append(r)
        for u in users[r]:
            if u in done:
                continue
            indeg[u] -= 1
            if indeg[u] == 0:
                heapq.heappush(heap, (key(u), u))
    return order


def canonicalize(m: TangleMachine) -> TangleMachine:
    """Renumber registers 0..n-1 in canonical order and sort structure."""
    order = canonical_order(m)
    mapping = {r: k for k, r in enumerate(order)}
    c = rename(m, mapping)
    return replace(
        c,
        registers=tuple(range(len(order))),
        interactions=tuple(sorted(c.interactions, key=lambda it: (min(o for _, o in it.patients), it.agent))),
        wyes=tuple(sorted(c.wyes, key=lambda w: w.out)),
        constants=dict(sorted(c.constants.items())),
        names=dict(sorted(c.names.items())),
    )


# ---------------------------------------------------------------- text format


def _colour_text(c: object) -> str:
    if hasattr(c, "a") and hasattr(c, "b"):
        return f"{format_colour(c.a)}|{format_colour(c.b)}"
    return format_colour(c)


def serialize(m: TangleMachine) -> str:
    c = canonicalize(m)
    lines = [f"machine {c.name}"]
    if c.quagma:
        lines.append(f"quagma {c.quagma}")
    ins, outs = set(c.inputs), set(c.outputs)
    for r in c.registers:
        tag = " in" if r in ins else " out" if r in outs else ""
        lines.append(f"reg {r}{tag}")
    if list(c.outputs) != sorted(c.outputs):
        lines.append("order out " + " ".join(str(r) for r in c.outputs))
    for r, col in c.constants.items():
        lines.append(f"const {r} {_colour_text(col)}")
    for r, n in c.names.items():
        lines.append(f"name {r} {n}")
    for it in c.interactions:
        pats = " ".join(f"{i}->{o}" for i, o in it.patients)
        lines.append(f"inter {it.agent} {it.op} {pats}")
    for w in c.wyes:
        lines.append(f"wye {w.mode} {w.in1} {w.in2} -> {w.out}")
    return "\n".join(lines) + "\n"


def _parse_colour_literal(text: str):
    if "|" in text:
        from .beliefnet import Belief

        a, b = text.split("|", 1)
        return Belief(parse_colour(a), parse_colour(b))
    return parse_colour(text)


def parse(text: str) -> TangleMachine:
    name = "machine"
    quagma = ""
    registers: list[int] = []
    inputs: list[int] = []
    outputs: list[int] = []
    out_order: list[int] | None = None
    constants: dict[int, object] = {}
    names: dict[int, str] = {}
    interactions: list[Interaction] = []
    wyes: list[Wye] = []

    def reg_id(tok: str, ln: int) -> int:
        try:
            return int(tok)
        except ValueError:
            raise ParseError(ln, f"bad register id {tok!r}") from None

    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        kw = parts[0]
        if kw == "machine":
            name = " ".join(parts[1:]) or name
        elif kw == "quagma":
            if len(parts) != 2:
                raise ParseError(ln, "quagma line needs one kind")
            quagma = parts[1]
        elif kw == "reg":
            if len(parts) not in (2, 3):
                raise ParseError(ln, "reg line is `reg <id> [in|out]`")
            r = reg_id(parts[1], ln)
            if r in registers:
                raise ParseError(ln, f"register {r} declared twice")
            registers.append(r)
            if len(parts) == 3:
                if parts[2] == "in":
                    inputs.append(r)
                elif parts[2] == "out":
                    outputs.append(r)
                else:
                    raise ParseError(ln, f"register flag must be in or out, got {parts[2]!r}")
        elif kw == "order":
            if len(parts) < 2 or parts[1] != "out":
                raise ParseError(ln, "order line is `order out <id> ...`")
            out_order = [reg_id(t, ln) for t in parts[2:]]
        elif kw == "const":
            if len(parts) != 3:
                raise ParseError(ln, "const line is `const <id> <colour>`")
            try:
                constants[reg_id(parts[1], ln)] = _parse_colour_literal(parts[2])
            except ValueError as e:
                raise ParseError(ln, str(e)) from None
        elif kw == "name":
            if len(parts) != 3:
                raise ParseError(ln, "name line is `name <id> <label>`")
            names[reg_id(parts[1], ln)] = parts[2]
        elif kw == "inter":
            if len(parts) < 4:
                raise ParseError(ln, "inter line is `inter <agent> <op> <in>-><out> ...`")
            agent = reg_id(parts[1], ln)
            try:
                op = parse_op(parts[2])
            except ValueError as e:
                raise ParseError(ln, str(e)) from None
            pats = []
            for tok in parts[3:]:
                if "->" not in tok:
                    raise ParseError(ln, f"patient {tok!r} is not <in>-><out>")
                a, b = tok.split("->", 1)
                pats.append((reg_id(a, ln), reg_id(b, ln)))
            interactions.append(Interaction(agent, op, tuple(pats)))
        elif kw == "wye":
            if len(parts) != 6 or parts[4] != "->":
                raise ParseError(ln, "wye line is `wye <max|min> <in1> <in2> -> <out>`")
            if parts[1] not in ("max", "min"):
                raise ParseError(ln, f"wye mode must be max or min, got {parts[1]!r}")
            wyes.append(Wye(parts[1], reg_id(parts[2], ln), reg_id(parts[3], ln), reg_id(parts[5], ln)))
        else:
            raise ParseError(ln, f"unknown keyword {kw!r}")
    if out_order is not None:
        if sorted(out_order) != sorted(outputs):
            raise ParseError(0, "order out line does not list the output registers")
        outputs = out_order
    m = TangleMachine(
        registers=tuple(registers),
        interactions=tuple(interactions),
        wyes=tuple(wyes),
        inputs=tuple(inputs),
        outputs=tuple(outputs),
        constants=constants,
        names=names,
        name=name,
        quagma=quagma,
    )
    rep = validate(m)
    if not rep.ok:
        raise ParseError(0, f"invalid machine: {rep}")
    return m


def structurally_equal(a: TangleMachine, b: TangleMachine) -> bool:
    return serialize(a) == serialize(b)


# ---------------------------------------------------------------- graph export


def to_dot(m: TangleMachine) -> str:
    """Graphviz text: one node per interaction or wye, registers as edges."""
    require_valid(m)
    c = canonicalize(m)
    lines = [f'digraph "{c.name}" {{', "  rankdir=LR;"]
    producer: dict[int, str] = {}
    consumer: dict[int, str] = {}
    agent_of: dict[int, list[str]] = {}
    for k, it in enumerate(c.interactions):
        node = f"i{k}"
        lines.append(f'  {node} [shape=box,label="{it.op}"];')
        for i, o in it.patients:
            consumer[i] = node
            producer[o] = node
        agent_of.setdefault(it.agent, []).append(node)
    for k, w in enumerate(c.wyes):
        node = f"w{k}"
        lines.append(f'  {node} [shape=triangle,label="{w.mode}"];')
        consumer[w.in1] = node
        consumer[w.in2] = node
        producer[w.out] = node
    terminals = []
    for r in c.registers:
        label = c.names.get(r, f"r{r}")
        src = producer.get(r)
        dst = consumer.get(r)
        if src is None:
            src = f"s{r}"
            terminals.append(f'  {src} [shape=point,label=""];')
        if dst is None:
            dst = f"t{r}"
            terminals.append(f'  {dst} [shape=point,label=""];')
        lines.append(f'  {src} -> {dst} [label="{label}"];')
        for node in agent_of.get(r, []):
            lines.append(f'  {src} -> {node} [style=dashed,arrowhead=dot,label="{label}"];')
    lines[2:2] = terminals
    lines.append("}")
    return "\n".join(lines) + "\n"


def inverse_direction(it: Interaction) -> Interaction:
    """The same crossing read with the agent's orientation reversed."""
    try:
        return replace(it, op=invert(it.op))
    except KindError:
        raise DiagramError(f"{it.op} cannot be reversed") from None
