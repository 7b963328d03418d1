"""Colour propagation: the oracle that decides what a machine computes.

Propagation is a worklist fixed point over the interaction and wye
equations. Interactions are solved forwards and backwards (the backward
rule uses the inverse operation); wyes only forwards. A final pass
re-checks every equation so closed loops that disagree with themselves are
reported as inconsistent.
"""

from __future__ import annotations

from collections import deque
from dataclasses import dataclass
from typing import Mapping, Sequence

from .algebra import Colour, Fox3, KindError, Quagma, apply, colour_kind, invert
from .diagram import TangleMachine, require_valid

DETERMINED = "Determined"
UNDERDETERMINED = "Underdetermined"
INCONSISTENT = "Inconsistent"


class ComputationError(RuntimeError):
    """The computation cannot take place: outputs are not uniquely determined."""


@dataclass(frozen=True)
class Colouring:
    values: Mapping[int, Colour]
    status: str
    unresolved: tuple[int, ...] = ()
    witness: tuple | None = None

    def __getitem__(self, r: int) -> Colour:
        return self.values[r]


def _order_key(x: Colour):
    if isinstance(x, Fox3):
        return x.residue
    if colour_kind(x) == "rat":
        return x
    raise KindError(f"wyes need an ordered carrier, got {colour_kind(x)}")


def wye_value(mode: str, a: Colour, b: Colour) -> Colour:
    if colour_kind(a) != colour_kind(b):
        raise KindError("wye inputs of different kinds")
    ka, kb = _order_key(a), _order_key(b)
    if mode == "max":
        return a if ka >= kb else b
    return a if ka <= kb else b


def _check_kind(q: Quagma | None, r: int, c: Colour) -> None:
    if q is not None and q.carrier != "belief" and colour_kind(c) != q.carrier:
        raise KindError(f"register {r} coloured {colour_kind(c)}, quagma carrier is {q.carrier}")


def propagate(
    m: TangleMachine,
    q: Quagma | None,
    inputs: Mapping[int, Colour],
    agent_colours: Mapping[int, Colour] | None = None,
) -> Colouring:
    """Propagate colours from the inputs through ``m``.

    ``agent_colours`` colours free agents; it may also seed registers on a
    closed loop, which the consistency pass then checks.
    """
    require_valid(m)
    if set(inputs) != set(m.inputs):
        raise ValueError("input colouring must colour exactly the input registers")
    known: dict[int, Colour] = {}
    regs = set(m.registers)
    for src in (m.constants, inputs, agent_colours or {}):
        for r, c in src.items():
            if r not in regs:
                raise ValueError(f"colour given for unknown register {r}")
            _check_kind(q, r, c)
            if r in known and known[r] != c:
                return Colouring(dict(known), INCONSISTENT, witness=(r, known[r], c))
            known[r] = c

    # equations: ("p", interaction index, patient index) or ("w", wye index)
    eqs: list[tuple] = []
    for k, it in enumerate(m.interactions):
        for j in range(len(it.patients)):
            eqs.append(("p", k, j))
    for k in range(len(m.wyes)):
        eqs.append(("w", k))
    touching: dict[int, list[int]] = {r: [] for r in m.registers}
    for e, eq in enumerate(eqs):
        for r in _regs(m, eq):
            touching[r].append(e)

    inverses = {}

    def inv(op):
        if op not in inverses:
            inverses[op] = invert(op)
        return inverses[op]

    queue = deque(range(len(eqs)))
    queued = [True] * len(eqs)
    conflict = None

    solved = [False] * len(eqs)

    def assign(r: int, c: Colour, e: int) -> None:
        nonlocal conflict
        if r in known:
            if known[r] != c and conflict is None:
                conflict = (r, known[r], c)
            return
        known[r] = c
        solved[e] = True
        for e in touching[r]:
            if not queued[e]:
                queued[e] = True
                queue.append(e)

    while queue and conflict is None:
        e = queue.popleft()
        queued[e] = False
        eq = eqs[e]
        if eq[0] == "p":
            it = m.interactions[eq[1]]
            i, o = it.patients[eq[2]]
            y = known.get(it.agent)
            if y is None:
                continue
            if i in known:
                assign(o, apply(it.op, known[i], y), e)
            elif o in known:
                assign(i, apply(inv(it.op), known[o], y), e)
        else:
            w = m.wyes[eq[1]]
            if w.in1 in known and w.in2 in known:
                assign(w.out, wye_value(w.mode, known[w.in1], known[w.in2]), e)

    if conflict is not None:
        return Colouring(dict(known), INCONSISTENT, witness=conflict)
    # equations that assigned a register hold by construction
    for e, eq in enumerate(eqs):
        if solved[e]:
            continue
        bad = _violated(m, eq, known)
        if bad is not None:
            return Colouring(dict(known), INCONSISTENT, witness=bad)
    missing = tuple(r for r in m.registers if r not in known)
    if missing:
        return Colouring(dict(known), UNDERDETERMINED, unresolved=missing)
    return Colouring(dict(known), DETERMINED)


def _regs(m: TangleMachine, eq: tuple) -> tuple[int, ...]:
    if eq[0] == "p":
        it = m.interactions[eq[1]]
        i, o = it.patients[eq[2]]
        return (it.agent, i, o)
    w = m.wyes[eq[1]]
    return (w.in1, w.in2, w.out)


def _violated(m: TangleMachine, eq: tuple, known: Mapping[int, Colour]):
    if eq[0] == "p":
        it = m.interactions[eq[1]]
        i, o = it.patients[eq[2]]
        if it.agent in known and i in known and o in known:
            want = apply(it.op, known[i], known[it.agent])
            if want != known[o]:
                return (o, known[o], want)
        return None
    w = m.wyes[eq[1]]
    if w.in1 in known and w.in2 in known and w.out in known:
        want = wye_value(w.mode, known[w.in1], known[w.in2])
        if want != known[w.out]:
            return (w.out, known[w.out], want)
    return None


def evaluate_io(
    m: TangleMachine,
    q: Quagma | None,
    inputs: Sequence[Colour],
    agent_colours: Mapping[int, Colour] | None = None,
) -> tuple[Colour, ...]:
    """Colours of the outputs, in order; raises when the computation fails."""
    if len(inputs) != len(m.inputs):
        raise ValueError(f"expected {len(m.inputs)} inputs, got {len(inputs)}")
    col = propagate(m, q, dict(zip(m.inputs, inputs)), agent_colours)
    if col.status == INCONSISTENT:
        r, a, b = col.witness
        raise ComputationError(f"computation cannot take place: register {r} is both {a} and {b}")
    if col.status == UNDERDETERMINED:
        raise ComputationError(
            f"computation cannot take place: {len(col.unresolved)} registers undetermined "
            f"(first {list(col.unresolved[:5])})"
        )
    return tuple(col.values[r] for r in m.outputs)
