"""Local moves on tangle machines and the equivalence tools built on them.

Moves never create, delete or rewire input and output registers. Agents
stay atomic: every rewrite keeps one interaction per agent action, so the
split-agent shapes (two agents standing in for one) cannot be produced.

A :class:`Semantics` object says how colours are computed. Quagma
semantics evaluate colour propagation; belief semantics evaluate belief
propagation. Moves consult it for the algebraic side conditions (which
operations distribute, whether inverse operations are defined).
"""

from __future__ import annotations

import random
from collections import deque
from dataclasses import dataclass, replace
from fractions import Fraction
from itertools import product
from typing import Iterable, Protocol, Sequence

from .algebra import (
    DEFAULT_SEED,
    Conj,
    Deform,
    KindError,
    LinearS,
    Mat,
    OpLabel,
    Quagma,
    apply,
    carrier_elements,
    get_quagma,
    invert,
    pair_distributes,
    sample_colour,
)
from .beliefnet import Belief, BeliefNetwork, IPParams, decides, propagate_network
from .colouring import ComputationError, evaluate_io, wye_value
from .diagram import Interaction, TangleMachine, Wye, require_valid, serialize

# moves that change the combinatorial machine
ACTIVE_MOVES = ("R1", "R2", "R3", "QuagmaR3", "I1", "I2", "YR3")
# moves that only change how a machine is drawn; identities on this representation
DRAWING_MOVES = ("VR1", "VR2", "VR3", "SV", "UC", "ST", "I3", "FM1", "FM2", "VYR1", "VYR3")
CATALOGUE = ACTIVE_MOVES + DRAWING_MOVES


class RewriteError(ValueError):
    pass


@dataclass(frozen=True)
class Move:
    kind: str
    direction: str = "apply"
    ops: tuple = ()

    def __post_init__(self) -> None:
        if self.kind not in CATALOGUE:
            raise RewriteError(f"unknown move {self.kind!r}")
        if self.direction not in ("apply", "undo"):
            raise RewriteError(f"direction must be apply or undo, got {self.direction!r}")

    @property
    def label(self) -> str:
        return self.kind if self.direction == "apply" else f"{self.kind}-undo"

    def __str__(self) -> str:
        if self.ops:
            return f"{self.label}({','.join(str(o) for o in self.ops)})"
        return self.label


@dataclass(frozen=True)
class Site:
    """Registers a move creates or removes, plus the structure it edits."""

    registers: tuple[int, ...] = ()
    interactions: tuple[int, ...] = ()
    wyes: tuple[int, ...] = ()
    agent: int | None = None
    index: int | None = None

    def __str__(self) -> str:
        parts = [f"regs={list(self.registers)}"]
        if self.interactions:
            parts.append(f"inter={list(self.interactions)}")
        if self.wyes:
            parts.append(f"wye={list(self.wyes)}")
        if self.agent is not None:
            parts.append(f"agent={self.agent}")
        if self.index is not None:
            parts.append(f"at={self.index}")
        return " ".join(parts)


# ---------------------------------------------------------------- semantics


class Semantics(Protocol):
    kink_op: OpLabel

    def r2_ok(self, op: OpLabel) -> bool: ...

    def r3_ok(self, inner: OpLabel, outer: OpLabel) -> bool: ...

    def yr3_mode(self, op: OpLabel, mode: str) -> str | None: ...

    def evaluate(self, m: TangleMachine, inputs: Sequence) -> tuple | None: ...

    def input_samples(self, m: TangleMachine, n: int) -> list[tuple]: ...


class QuagmaSemantics:
    """Colour propagation over a quagma."""

    def __init__(self, q: Quagma, seed: int = DEFAULT_SEED, exhaustive_cap: int = 729) -> None:
        self.q = q
        self.seed = seed
        self.exhaustive_cap = exhaustive_cap
        self.kink_op = q.ops[0]
        self._r3: dict = {}

    def r2_ok(self, op: OpLabel) -> bool:
        # plain conjugation is undefined at singular agents
        if isinstance(op, (Conj, Deform)):
            return False
        try:
            invert(op)
        except (KindError, ZeroDivisionError):
            return False
        return True

    def r3_ok(self, inner: OpLabel, outer: OpLabel) -> bool:
        key = (inner, outer)
        if key not in self._r3:
            try:
                self._r3[key] = pair_distributes(self.q, inner, outer)
            except (KindError, ZeroDivisionError):
                self._r3[key] = False
        return self._r3[key]

    def yr3_mode(self, op: OpLabel, mode: str) -> str | None:
        flip = {"max": "min", "min": "max"}
        if isinstance(op, LinearS) and self.q.carrier == "rat":
            if op.s < 1:
                return mode
            if op.s > 1:
                return flip[mode]
            return None
        elems = carrier_elements(self.q.carrier)
        if elems is None:
            return None
        for cand in (mode, flip[mode]):
            try:
                if all(
                    apply(op, wye_value(mode, x, y), z) == wye_value(cand, apply(op, x, z), apply(op, y, z))
                    for x, y, z in product(elems, repeat=3)
                ):
                    return cand
            except KindError:
                return None
        return None

    def evaluate(self, m: TangleMachine, inputs: Sequence) -> tuple | None:
        try:
            return evaluate_io(m, self.q, inputs)
        except (ComputationError, ZeroDivisionError, KindError):
            return None

    def input_samples(self, m: TangleMachine, n: int) -> list[tuple]:
        k = len(m.inputs)
        elems = carrier_elements(self.q.carrier)
        if elems is not None and len(elems) ** k <= self.exhaustive_cap:
            return list(product(elems, repeat=k))
        rng = random.Random(self.seed)
        return [tuple(_small_colour(self.q.carrier, rng) for _ in range(k)) for _ in range(n)]


def _small_colour(carrier: str, rng: random.Random):
    """Small integer samples keep exact matrix arithmetic cheap."""
    if carrier in ("mat2", "mat4"):
        size = 2 if carrier == "mat2" else 4
        return Mat.of([[Fraction(rng.randint(-2, 2)) for _ in range(size)] for _ in range(size)])
    return sample_colour(carrier, rng)


class BeliefSemantics:
    """Belief propagation; the update rule has no inverse in the catalogue."""

    kink_op = Deform()

    def __init__(self, p: IPParams | None = None, seed: int = DEFAULT_SEED) -> None:
        self.p = p or IPParams(1, Fraction(1, 2), Fraction(1, 2))
        self.seed = seed

    def r2_ok(self, op: OpLabel) -> bool:
        return False

    def r3_ok(self, inner: OpLabel, outer: OpLabel) -> bool:
        # both tracks are affine with a common h, so the rule self-distributes
        return isinstance(inner, Deform) and isinstance(outer, Deform)

    def yr3_mode(self, op: OpLabel, mode: str) -> str | None:
        return None

    def evaluate(self, m: TangleMachine, inputs: Sequence) -> tuple | None:
        net = BeliefNetwork(m, dict(zip(m.inputs, inputs)))
        vals = propagate_network(net, self.p)
        return tuple(vals[r] for r in m.outputs)

    def input_samples(self, m: TangleMachine, n: int) -> list[tuple]:
        rng = random.Random(self.seed)

        def one() -> Belief:
            return Belief(Fraction(rng.randint(0, 8), 8), Fraction(rng.randint(0, 8), 8))

        return [tuple(one() for _ in m.inputs) for _ in range(n)]


def semantics_for(m: TangleMachine, sem=None):
    """Coerce a quagma, a name, a semantics object or ``None`` to semantics."""
    if sem is None:
        sem = m.quagma
        if not sem:
            raise RewriteError("machine names no quagma; pass semantics explicitly")
    if isinstance(sem, str):
        return BeliefSemantics() if sem == "belief" else QuagmaSemantics(get_quagma(sem))
    if isinstance(sem, Quagma):
        return BeliefSemantics() if sem.carrier == "belief" else QuagmaSemantics(sem)
    if isinstance(sem, IPParams):
        return BeliefSemantics(sem)
    return sem


# ---------------------------------------------------------------- structure helpers


@dataclass
class _Uses:
    consumers: dict[int, list[tuple]]
    agents: dict[int, list[int]]

    def only_consumer(self, r: int):
        c = self.consumers.get(r, [])
        return c[0] if len(c) == 1 else None


def _uses(m: TangleMachine) -> _Uses:
    cons: dict[int, list[tuple]] = {r: [] for r in m.registers}
    ags: dict[int, list[int]] = {r: [] for r in m.registers}
    for k, it in enumerate(m.interactions):
        ags[it.agent].append(k)
        for j, (i, _) in enumerate(it.patients):
            cons[i].append(("p", k, j))
    for k, w in enumerate(m.wyes):
        cons[w.in1].append(("w", k, 1))
        cons[w.in2].append(("w", k, 2))
    return _Uses(cons, ags)


def _protected(m: TangleMachine) -> set[int]:
    return set(m.inputs) | set(m.outputs) | set(m.constants)


def _swap_reg(it: Interaction, old: int, new: int, agent: bool = True, patients: bool = True) -> Interaction:
    a = new if (agent and it.agent == old) else it.agent
    pats = tuple(((new if (patients and i == old) else i), o) for i, o in it.patients)
    return Interaction(a, it.op, pats)


def _redirect(inters: list, wyes: list, old: int, new: int, agents: bool) -> None:
    """Point every consumer of ``old`` (and optionally agent use) at ``new``."""
    for k, it in enumerate(inters):
        inters[k] = _swap_reg(it, old, new, agent=agents)
    for k, w in enumerate(wyes):
        wyes[k] = Wye(w.mode, new if w.in1 == old else w.in1, new if w.in2 == old else w.in2, w.out)


def _regs_replace(regs: Sequence[int], remove: Iterable[int] = (), insert: dict | None = None) -> tuple[int, ...]:
    """Drop ``remove`` and splice in ``insert[r]`` lists right after register ``r``.

    Keys of ``insert`` that are themselves removed keep their slot for the
    inserted registers, so a replacement sits where the original sat.
    """
    remove = set(remove)
    insert = insert or {}
    out = []
    for r in regs:
        if r not in remove:
            out.append(r)
        out.extend(insert.get(r, ()))
    return tuple(out)


def _acyclic(m: TangleMachine) -> bool:
    deps = m.dependencies()
    state: dict[int, int] = {}
    for root in m.registers:
        if root in state:
            continue
        stack = [(root, iter(deps[root]))]
        state[root] = 1
        while stack:
            r, it = stack[-1]
            nxt = next(it, None)
            if nxt is None:
                state[r] = 2
                stack.pop()
            elif state.get(nxt) == 1:
                return False
            elif nxt not in state:
                state[nxt] = 1
                stack.append((nxt, iter(deps[nxt])))
    return True


# ---------------------------------------------------------------- move discovery


def find_moves(m: TangleMachine, sem=None) -> list[tuple[Move, Site]]:
    """Every applicable (move, site) pair, in a deterministic order."""
    sem = semantics_for(m, sem)
    require_valid(m)
    prot = _protected(m)
    uses = _uses(m)
    producers = m.producers()
    out: list[tuple[Move, Site]] = []
    inters = m.interactions

    # R1: kinks
    for r in m.registers:
        if r not in prot:
            out.append((Move("R1", "apply", (sem.kink_op,)), Site((r,))))
    for k, it in enumerate(inters):
        if len(it.patients) == 1:
            i, o = it.patients[0]
            if it.agent == i and i not in prot and o not in prot:
                out.append((Move("R1", "undo", (it.op,)), Site((o,), (k,))))

    # R2: an operation followed by its inverse under the same agent
    down_cache: dict[int, set[int]] = {}

    def downstream(r: int) -> set[int]:
        if r not in down_cache:
            down_cache[r] = m.downstream(r)
        return down_cache[r]

    for r in m.registers:
        if r in prot:
            continue
        local = []
        if producers.get(r, ("", -1))[0] == "inter":
            local.append(inters[producers[r][1]])
        for kind, k, _ in uses.consumers[r]:
            if kind == "p":
                local.append(inters[k])
        seen = set()
        for it in local:
            key = (it.agent, it.op)
            if key in seen or it.agent == r or it.agent in downstream(r) or not sem.r2_ok(it.op):
                continue
            seen.add(key)
            out.append((Move("R2", "apply", (it.op,)), Site((r,), agent=it.agent)))
    for k1, it1 in enumerate(inters):
        if len(it1.patients) != 1 or not sem.r2_ok(it1.op):
            continue
        a, b = it1.patients[0]
        c_use = uses.only_consumer(b)
        if b in prot or uses.agents[b] or c_use is None or c_use[0] != "p":
            continue
        k2 = c_use[1]
        it2 = inters[k2]
        if k2 == k1 or len(it2.patients) != 1 or it2.agent != it1.agent or it2.op != invert(it1.op):
            continue
        c = it2.patients[0][1]
        if c in prot or a == c:
            continue
        out.append((Move("R2", "undo", (it1.op, it2.op)), Site((b, c), (k1, k2))))

    # R3: left form  y: x -> x1 ; z: x1 -> x2, y -> y1
    for k1, it1 in enumerate(inters):
        if len(it1.patients) != 1:
            continue
        x, x1 = it1.patients[0]
        y = it1.agent
        if x1 in prot or uses.agents[x1]:
            continue
        use = uses.only_consumer(x1)
        if use is None or use[0] != "p" or use[1] == k1:
            continue
        k2 = use[1]
        it2 = inters[k2]
        if not any(i == y for i, _ in it2.patients):
            continue
        z = it2.agent
        if z == x1 or z in downstream(x1):
            continue
        if not sem.r3_ok(it1.op, it2.op):
            continue
        kind = "R3" if it1.op == it2.op else "QuagmaR3"
        out.append((Move(kind, "apply", (it1.op, it2.op)), Site((x1,), (k1, k2))))
    # R3: right form  z: x -> x1', y -> y1 ; y1: x1' -> x2
    for k1, it1 in enumerate(inters):
        if len(it1.patients) != 1:
            continue
        x1p, _ = it1.patients[0]
        y1 = it1.agent
        if x1p in prot or uses.agents[x1p] or x1p == y1:
            continue
        p1, p2 = producers.get(x1p), producers.get(y1)
        if p1 is None or p1 != p2 or p1[0] != "inter" or p1[1] == k1:
            continue
        it2 = inters[p1[1]]
        if not sem.r3_ok(it1.op, it2.op):
            continue
        kind = "R3" if it1.op == it2.op else "QuagmaR3"
        out.append((Move(kind, "undo", (it1.op, it2.op)), Site((x1p,), (k1, p1[1]))))

    # I1: split off the last patient, or merge two actions of one agent
    for k, it in enumerate(inters):
        if len(it.patients) >= 2:
            out.append((Move("I1", "apply"), Site((), (k,))))
    for k1, it1 in enumerate(inters):
        for k2 in range(k1 + 1, len(inters)):
            it2 = inters[k2]
            if it2.agent != it1.agent or it2.op != it1.op:
                continue
            # one action must not feed the other, or the merged one would consume its own output
            outs1 = {o for _, o in it1.patients}
            outs2 = {o for _, o in it2.patients}
            if any(i in outs2 for i, _ in it1.patients) or any(i in outs1 for i, _ in it2.patients):
                continue
            out.append((Move("I1", "undo"), Site((), (k1, k2))))

    # I2: reorder two neighbouring patients of one interaction
    for k, it in enumerate(inters):
        for j in range(len(it.patients) - 1):
            out.append((Move("I2", "apply"), Site((), (k,), index=j)))

    # YR3: a wye passes under an agent
    for kw, w in enumerate(m.wyes):
        c = w.out
        use = uses.only_consumer(c)
        if c in prot or uses.agents[c] or use is None or use[0] != "p":
            continue
        it = inters[use[1]]
        new_mode = sem.yr3_mode(it.op, w.mode)
        if new_mode is None:
            continue
        out.append((Move("YR3", "apply", (it.op,)), Site((c,), (use[1],), (kw,))))
    for kw, w in enumerate(m.wyes):
        a1, b1 = w.in1, w.in2
        if a1 in prot or b1 in prot or uses.agents[a1] or uses.agents[b1]:
            continue
        pa, pb = producers.get(a1), producers.get(b1)
        if pa is None or pa != pb or pa[0] != "inter":
            continue
        it = inters[pa[1]]
        old = sem.yr3_mode(it.op, "max")
        if old is None:
            continue
        out.append((Move("YR3", "undo", (it.op,)), Site((a1, b1), (pa[1],), (kw,))))
    return out


# ---------------------------------------------------------------- move application


def apply_move(m: TangleMachine, move: Move, site: Site | None = None, sem=None) -> TangleMachine:
    """Rewrite ``m`` at ``site``; the pair must come from :func:`find_moves`."""
    if move.kind in DRAWING_MOVES:
        return m
    if site is None:
        raise RewriteError(f"{move} needs a site")
    touched = set(site.registers) & set(m.inputs + m.outputs)
    if touched:
        raise RewriteError(f"site touches input/output registers {sorted(touched)}")
    sem = semantics_for(m, sem)
    if (move, site) not in find_moves(m, sem):
        raise RewriteError(f"{move} is not applicable at {site}")
    new = _rewrite(m, move, site, sem)
    require_valid(new)
    if not _acyclic(new):
        raise RewriteError(f"{move} at {site} would create a feedback loop")
    return new


def _rewrite(m: TangleMachine, move: Move, site: Site, sem) -> TangleMachine:
    inters = list(m.interactions)
    wyes = list(m.wyes)
    regs = m.registers
    nid = m.next_id()
    kind, undo = move.kind, move.direction == "undo"

    if kind == "R1" and not undo:
        (r,) = site.registers
        _redirect(inters, wyes, r, nid, agents=False)
        inters.append(Interaction(r, move.ops[0], ((r, nid),)))
        regs = _regs_replace(regs, insert={r: [nid]})
    elif kind == "R1":
        (o,) = site.registers
        (k,) = site.interactions
        i = inters[k].patients[0][0]
        del inters[k]
        _redirect(inters, wyes, o, i, agents=True)
        regs = _regs_replace(regs, remove=[o])
    elif kind == "R2" and not undo:
        (r,) = site.registers
        r1, r2 = nid, nid + 1
        _redirect(inters, wyes, r, r2, agents=False)
        op = move.ops[0]
        inters.append(Interaction(site.agent, op, ((r, r1),)))
        inters.append(Interaction(site.agent, invert(op), ((r1, r2),)))
        regs = _regs_replace(regs, insert={r: [r1, r2]})
    elif kind == "R2":
        b, c = site.registers
        k1, k2 = site.interactions
        a = inters[k1].patients[0][0]
        for k in sorted((k1, k2), reverse=True):
            del inters[k]
        _redirect(inters, wyes, c, a, agents=True)
        regs = _regs_replace(regs, remove=[b, c])
    elif kind in ("R3", "QuagmaR3") and not undo:
        (x1,) = site.registers
        k1, k2 = site.interactions
        it1, it2 = inters[k1], inters[k2]
        x = it1.patients[0][0]
        y = it1.agent
        x2 = next(o for i, o in it2.patients if i == x1)
        y1 = next(o for i, o in it2.patients if i == y)
        inters[k2] = Interaction(it2.agent, it2.op, tuple(((x, nid) if i == x1 else (i, o)) for i, o in it2.patients))
        inters[k1] = Interaction(y1, it1.op, ((nid, x2),))
        regs = _regs_replace(regs, remove=[x1], insert={x1: [nid]})
    elif kind in ("R3", "QuagmaR3"):
        (x1p,) = site.registers
        k1, k2 = site.interactions
        it1, it2 = inters[k1], inters[k2]
        x2 = it1.patients[0][1]
        y1 = it1.agent
        x = next(i for i, o in it2.patients if o == x1p)
        y = next(i for i, o in it2.patients if o == y1)
        inters[k2] = Interaction(it2.agent, it2.op, tuple(((nid, x2) if o == x1p else (i, o)) for i, o in it2.patients))
        inters[k1] = Interaction(y, it1.op, ((x, nid),))
        regs = _regs_replace(regs, remove=[x1p], insert={x1p: [nid]})
    elif kind == "I1" and not undo:
        (k,) = site.interactions
        it = inters[k]
        inters[k] = Interaction(it.agent, it.op, it.patients[:-1])
        inters.insert(k + 1, Interaction(it.agent, it.op, it.patients[-1:]))
    elif kind == "I1":
        k1, k2 = site.interactions
        it1, it2 = inters[k1], inters[k2]
        inters[k1] = Interaction(it1.agent, it1.op, it1.patients + it2.patients)
        del inters[k2]
    elif kind == "I2":
        (k,) = site.interactions
        j = site.index
        pats = list(inters[k].patients)
        pats[j], pats[j + 1] = pats[j + 1], pats[j]
        inters[k] = Interaction(inters[k].agent, inters[k].op, tuple(pats))
    elif kind == "YR3" and not undo:
        (c,) = site.registers
        (k,) = site.interactions
        (kw,) = site.wyes
        w, it = wyes[kw], inters[k]
        c2 = next(o for i, o in it.patients if i == c)
        a1, b1 = nid, nid + 1
        pats = []
        for i, o in it.patients:
            pats.extend([(w.in1, a1), (w.in2, b1)] if i == c else [(i, o)])
        inters[k] = Interaction(it.agent, it.op, tuple(pats))
        wyes[kw] = Wye(sem.yr3_mode(it.op, w.mode), a1, b1, c2)
        regs = _regs_replace(regs, remove=[c], insert={c: [a1, b1]})
    elif kind == "YR3":
        a1, b1 = site.registers
        (k,) = site.interactions
        (kw,) = site.wyes
        w, it = wyes[kw], inters[k]
        a = next(i for i, o in it.patients if o == a1)
        b = next(i for i, o in it.patients if o == b1)
        c = nid
        pats = []
        for i, o in it.patients:
            if o == a1:
                pats.append((c, w.out))
            elif o != b1:
                pats.append((i, o))
        inters[k] = Interaction(it.agent, it.op, tuple(pats))
        # the original mode maps to w.mode under this op
        old = "max" if sem.yr3_mode(it.op, "max") == w.mode else "min"
        wyes[kw] = Wye(old, a, b, c)
        regs = _regs_replace(regs, remove=[a1, b1], insert={a1: [c]})
    else:  # pragma: no cover - guarded by find_moves
        raise RewriteError(f"no rewrite rule for {move}")
    return replace(m, registers=regs, interactions=tuple(inters), wyes=tuple(wyes))


def undo_of(move: Move) -> Move:
    if move.kind == "I2":
        # swapping two patients is its own inverse
        return move
    return Move(move.kind, "apply" if move.direction == "undo" else "undo", move.ops)


# ---------------------------------------------------------------- move scripts


def parse_script(text: str) -> list[tuple[str, int]]:
    """Lines ``move <label> at <site-id>``; ``#`` starts a comment."""
    steps = []
    for ln, raw in enumerate(text.splitlines(), 1):
        line = raw.split("#", 1)[0].strip()
        if not line:
            continue
        parts = line.split()
        if len(parts) != 4 or parts[0] != "move" or parts[2] != "at":
            raise RewriteError(f"line {ln}: expected `move <name> at <site-id>`, got {line!r}")
        try:
            steps.append((parts[1], int(parts[3])))
        except ValueError:
            raise RewriteError(f"line {ln}: site id must be an integer") from None
    return steps


def apply_script(m: TangleMachine, text: str, sem=None) -> TangleMachine:
    """Apply each scripted move; site ids index the current :func:`find_moves` list."""
    sem = semantics_for(m, sem)
    for label, sid in parse_script(text):
        moves = find_moves(m, sem)
        if not 0 <= sid < len(moves):
            raise RewriteError(f"site id {sid} out of range (0..{len(moves) - 1})")
        move, site = moves[sid]
        if move.label != label:
            raise RewriteError(f"site {sid} holds {move.label}, not {label}")
        m = apply_move(m, move, site, sem)
    return m


# ---------------------------------------------------------------- bisimulation and exploration


def shape(m: TangleMachine) -> str:
    """Canonical text without register labels or machine name."""
    return serialize(replace(m, names={}, name="machine"))


def check_bisimilar(m1: TangleMachine, m2: TangleMachine, sem=None, samples: int = 100) -> bool:
    """Same outputs on every sampled input (exhaustive on Fox-3).

    An input on which both machines fail to compute counts as agreement.
    """
    if len(m1.inputs) != len(m2.inputs) or len(m1.outputs) != len(m2.outputs):
        raise RewriteError("machines have different input/output arities")
    sem = semantics_for(m1, sem)
    reference = io_table(m1, sem, samples)
    return all(sem.evaluate(m2, xs) == want for xs, want in reference)


_IO_CACHE: dict = {}


def io_table(m: TangleMachine, sem, samples: int = 100) -> list[tuple]:
    """(inputs, outputs) pairs on the sampled inputs; outputs None on failure."""
    sem = semantics_for(m, sem)
    key = (id(sem), serialize(m), samples)
    hit = _IO_CACHE.get(key)
    # the semantics object is kept alongside so a recycled id cannot alias
    if hit is None or hit[0] is not sem:
        if len(_IO_CACHE) > 512:
            _IO_CACHE.clear()
        hit = _IO_CACHE[key] = (sem, [(xs, sem.evaluate(m, xs)) for xs in sem.input_samples(m, samples)])
    return hit[1]


def explore_equivalents(
    m: TangleMachine,
    sem=None,
    budget: int = 2,
    max_machines: int = 256,
    kinds: Iterable[str] | None = None,
    samples: int = 25,
) -> list[TangleMachine]:
    """Breadth-first closure under moves, at most ``budget`` moves deep.

    Machines are deduplicated by canonical text and returned in discovery
    order, starting with ``m``.
    """
    sem = semantics_for(m, sem)
    allowed = set(kinds) if kinds is not None else None
    seen = {shape(m)}
    found = [m]
    frontier = deque([(m, 0)])
    while frontier and len(found) < max_machines:
        cur, depth = frontier.popleft()
        if depth >= budget:
            continue
        for move, site in find_moves(cur, sem):
            if allowed is not None and move.kind not in allowed:
                continue
            try:
                nxt = apply_move(cur, move, site, sem)
            except RewriteError:
                continue
            key = shape(nxt)
            if key in seen:
                continue
            seen.add(key)
            found.append(nxt)
            frontier.append((nxt, depth + 1))
            if len(found) >= max_machines:
                break
    for other in found[1:]:
        if not check_bisimilar(m, other, sem, samples):
            raise RewriteError("a rewrite changed the computation")
    return found


# ---------------------------------------------------------------- zero knowledge


@dataclass(frozen=True)
class ZKVerdict:
    verdict: str
    reason: str = ""
    witness: TangleMachine | None = None
    register: int | None = None

    def __str__(self) -> str:
        return self.verdict if not self.reason else f"{self.verdict}: {self.reason}"


def _label(m: TangleMachine, r: int) -> str:
    return m.names.get(r, f"register {r}")


def deciding_intermediates(net: BeliefNetwork, p: IPParams, kappa, word_len: int) -> list[int]:
    vals = propagate_network(net, p)
    return [r for r in net.intermediates() if decides(vals[r], kappa, word_len)]


def is_zero_knowledge(
    net: BeliefNetwork,
    p: IPParams,
    kappa,
    word_len: int,
    budget: int = 2,
    max_machines: int = 256,
) -> ZKVerdict:
    m = net.machine
    vals = propagate_network(net, p)
    deciders = [net.decider] if net.decider is not None else list(m.outputs)
    if not any(decides(vals[r], kappa, word_len) for r in deciders):
        return ZKVerdict("not_deciding", "no terminal register decides")
    inside = deciding_intermediates(net, p, kappa, word_len)
    if inside:
        r = inside[0]
        return ZKVerdict("not_zk", f"intermediate {_label(m, r)} decides ({vals[r]})", m, r)
    sem = BeliefSemantics(p)
    for other in explore_equivalents(m, sem, budget, max_machines)[1:]:
        found = deciding_intermediates(net.with_machine(other), p, kappa, word_len)
        if found:
            return ZKVerdict("zk", f"equivalent machine decides at {_label(other, found[0])}", other, found[0])
    return ZKVerdict("not_zk", f"no equivalent machine within {budget} moves decides at an intermediate")


# ---------------------------------------------------------------- random machines


def random_machine(
    rng: random.Random,
    quagma: str | Quagma,
    max_interactions: int = 6,
    wye_prob: float = 0.0,
) -> TangleMachine:
    """A random acyclic machine with 2-3 inputs and no free registers."""
    q = get_quagma(quagma) if isinstance(quagma, str) else quagma
    regs: list[int] = []
    inputs = [0, 1] if rng.random() < 0.5 else [0, 1, 2]
    regs.extend(inputs)
    ends = list(inputs)
    inters: list[Interaction] = []
    wyes: list[Wye] = []
    nid = len(regs)
    n = rng.randint(1, max_interactions)
    for _ in range(n):
        if wye_prob and len(ends) >= 2 and rng.random() < wye_prob:
            a, b = rng.sample(ends, 2)
            ends.remove(a)
            ends.remove(b)
            wyes.append(Wye(rng.choice(("max", "min")), a, b, nid))
            regs.append(nid)
            ends.append(nid)
            nid += 1
            continue
        agent = rng.choice(regs)
        k = 1 if len(ends) < 2 or rng.random() < 0.6 else 2
        pats = rng.sample(ends, k)
        pairs = []
        for pt in pats:
            ends.remove(pt)
            pairs.append((pt, nid))
            regs.append(nid)
            ends.append(nid)
            nid += 1
        inters.append(Interaction(agent, rng.choice(q.ops), tuple(pairs)))
    outs = tuple(r for r in ends if r not in inputs)
    m = TangleMachine(
        registers=tuple(regs),
        interactions=tuple(inters),
        wyes=tuple(wyes),
        inputs=tuple(inputs),
        outputs=outs,
        name="random",
        quagma=q.name,
    )
    require_valid(m)
    return m


def fake_moves_expressible() -> bool:
    """Whether the catalogue holds a move that splits or duplicates an agent."""
    return any(name.startswith("fake") or "split" in name.lower() for name in CATALOGUE)
