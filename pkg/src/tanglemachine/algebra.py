"""Colour sets and the binary-operation families that act on them.

Colours are immutable values. Rational scalars are plain ``Fraction`` objects,
Fox-3 residues are wrapped in :class:`Fox3`, and matrices are :class:`Mat`
instances holding tuples of ``Fraction`` entries.
"""

from __future__ import annotations

import random
import re
from dataclasses import dataclass
from fractions import Fraction
from itertools import product
from typing import Iterable, Union


class KindError(TypeError):
    """An operation was applied to a colour outside its carrier."""


@dataclass(frozen=True, order=True)
class Fox3:
    residue: int

    def __post_init__(self) -> None:
        if self.residue not in (0, 1, 2):
            raise ValueError(f"Fox-3 residue must be 0, 1 or 2, got {self.residue}")

    def __str__(self) -> str:
        return f"f{self.residue}"


@dataclass(frozen=True)
class Mat:
    """Square matrix with exact rational entries (2x2 or 4x4)."""

    rows: tuple[tuple[Fraction, ...], ...]

    def __post_init__(self) -> None:
        n = len(self.rows)
        if n not in (2, 4) or any(len(r) != n for r in self.rows):
            raise ValueError("only 2x2 and 4x4 matrices are supported")
        if not all(type(v) is Fraction for r in self.rows for v in r):
            object.__setattr__(self, "rows", tuple(tuple(Fraction(v) for v in r) for r in self.rows))

    @classmethod
    def of(cls, rows: Iterable[Iterable[object]]) -> "Mat":
        return cls(tuple(tuple(Fraction(v) for v in r) for r in rows))

    @classmethod
    def identity(cls, n: int = 2) -> "Mat":
        return cls.of([[1 if i == j else 0 for j in range(n)] for i in range(n)])

    @classmethod
    def zero(cls, n: int = 2) -> "Mat":
        return cls.of([[0] * n for _ in range(n)])

    @property
    def size(self) -> int:
        return len(self.rows)

    def __add__(self, other: "Mat") -> "Mat":
        return Mat(tuple(tuple(a + b for a, b in zip(r, s)) for r, s in zip(self.rows, other.rows)))

    def __sub__(self, other: "Mat") -> "Mat":
        return Mat(tuple(tuple(a - b for a, b in zip(r, s)) for r, s in zip(self.rows, other.rows)))

    def __neg__(self) -> "Mat":
        return Mat(tuple(tuple(-a for a in r) for r in self.rows))

    def scale(self, k: Fraction) -> "Mat":
        return Mat(tuple(tuple(k * a for a in r) for r in self.rows))

    def __matmul__(self, other: "Mat") -> "Mat":
        cols = list(zip(*other.rows))
        return Mat(tuple(tuple(sum((a * b for a, b in zip(r, c)), Fraction(0)) for c in cols) for r in self.rows))

    def det(self) -> Fraction:
        return _det([list(r) for r in self.rows])

    def inverse(self) -> "Mat":
        n = self.size
        if n == 2:
            (a, b), (c, d) = self.rows
            det = a * d - b * c
            if det == 0:
                raise ZeroDivisionError("singular matrix")
            return Mat(((d / det, -b / det), (-c / det, a / det)))
        aug = [list(r) + [Fraction(int(i == j)) for j in range(n)] for i, r in enumerate(self.rows)]
        for col in range(n):
            pivot = next((i for i in range(col, n) if aug[i][col] != 0), None)
            if pivot is None:
                raise ZeroDivisionError("singular matrix")
            aug[col], aug[pivot] = aug[pivot], aug[col]
            p = aug[col][col]
            aug[col] = [v / p for v in aug[col]]
            for i in range(n):
                if i != col and aug[i][col] != 0:
                    f = aug[i][col]
                    aug[i] = [a - f * b for a, b in zip(aug[i], aug[col])]
        return Mat(tuple(tuple(r[n:]) for r in aug))

    def __str__(self) -> str:
        return "[" + ",".join("[" + ",".join(_frac_str(v) for v in r) + "]" for r in self.rows) + "]"


def _det(m: list[list[Fraction]]) -> Fraction:
    n = len(m)
    if n == 1:
        return m[0][0]
    if n == 2:
        return m[0][0] * m[1][1] - m[0][1] * m[1][0]
    total = Fraction(0)
    for j in range(n):
        if m[0][j] == 0:
            continue
        minor = [row[:j] + row[j + 1:] for row in m[1:]]
        total += (-1) ** j * m[0][j] * _det(minor)
    return total


Colour = Union[Fox3, Fraction, Mat]


def colour_kind(x: object) -> str:
    """Return the carrier kind of a colour: fox3, rat, mat2 or mat4."""
    if isinstance(x, Fox3):
        return "fox3"
    if isinstance(x, Fraction):
        return "rat"
    if isinstance(x, Mat):
        return f"mat{x.size}"
    raise KindError(f"not a colour: {x!r}")


# ---------------------------------------------------------------- operations


@dataclass(frozen=True)
class LinearS:
    """x |>_s y = (1-s)x + sy, acting entrywise on matrices."""

    s: Fraction

    def __post_init__(self) -> None:
        object.__setattr__(self, "s", Fraction(self.s))
        if self.s == 1:
            raise ValueError("LinearS requires s != 1")

    def __str__(self) -> str:
        return f"lin:{_frac_str(self.s)}"


@dataclass(frozen=True)
class Conj:
    """Plain conjugation y^-1 x y (or y x y^-1 when ``inverse``)."""

    inverse: bool = False

    def __str__(self) -> str:
        return "conj-inv" if self.inverse else "conj"


@dataclass(frozen=True)
class ConjGuarded:
    """Conjugation that leaves x unchanged when det(y) = 0."""

    inverse: bool = False

    def __str__(self) -> str:
        return "gconj-inv" if self.inverse else "gconj"


@dataclass(frozen=True)
class Fox3Op:
    """x |> y = 2y - x mod 3."""

    def __str__(self) -> str:
        return "fox3"


@dataclass(frozen=True)
class Deform:
    """Placeholder label for the belief-update rule of belief networks.

    The rule depends on protocol parameters, so it is evaluated by
    :mod:`tanglemachine.beliefnet` rather than by :func:`apply`.
    """

    def __str__(self) -> str:
        return "belief"


OpLabel = Union[LinearS, Conj, ConjGuarded, Fox3Op, Deform]


def _frac_str(v: Fraction) -> str:
    return str(v.numerator) if v.denominator == 1 else f"{v.numerator}/{v.denominator}"


def apply(op: OpLabel, x: Colour, y: Colour) -> Colour:
    """Right action of ``y`` on ``x`` under ``op``."""
    kx, ky = colour_kind(x), colour_kind(y)
    if kx != ky:
        raise KindError(f"{op} cannot combine {kx} with {ky}")
    if isinstance(op, Fox3Op):
        if kx != "fox3":
            raise KindError(f"fox3 op applied to {kx}")
        return Fox3((2 * y.residue - x.residue) % 3)
    if isinstance(op, LinearS):
        if kx == "fox3":
            raise KindError("linear op applied to a Fox-3 colour")
        if kx == "rat":
            return (1 - op.s) * x + op.s * y
        return x.scale(1 - op.s) + y.scale(op.s)
    if isinstance(op, (Conj, ConjGuarded)):
        if not kx.startswith("mat"):
            raise KindError(f"conjugation applied to {kx}")
        if y.det() == 0:
            if isinstance(op, ConjGuarded):
                return x
            raise ZeroDivisionError("conjugation by a singular matrix")
        yi = y.inverse()
        return (y @ x @ yi) if op.inverse else (yi @ x @ y)
    if isinstance(op, Deform):
        raise KindError("belief updates are evaluated by the beliefnet module")
    raise KindError(f"unknown operation {op!r}")


def invert(op: OpLabel) -> OpLabel:
    """Operation undoing ``op`` for a fixed right argument."""
    if isinstance(op, LinearS):
        return LinearS(op.s / (op.s - 1))
    if isinstance(op, Conj):
        return Conj(not op.inverse)
    if isinstance(op, ConjGuarded):
        return ConjGuarded(not op.inverse)
    if isinstance(op, Fox3Op):
        return op
    raise KindError(f"{op} has no inverse in the catalogue")


def kron(x: Mat, y: Mat) -> Mat:
    """Kronecker product of two 2x2 matrices."""
    if not (isinstance(x, Mat) and isinstance(y, Mat) and x.size == 2 and y.size == 2):
        raise KindError("kron expects two 2x2 matrices")
    return Mat(
        tuple(
            tuple(x.rows[i // 2][j // 2] * y.rows[i % 2][j % 2] for j in range(4))
            for i in range(4)
        )
    )


def cloning_sides(a: Mat, b: Mat) -> tuple[Mat, Mat]:
    """Both outputs a universal cloner would force to agree.

    Cloning after averaging gives (a ▷½ b) ⊗ (a ▷½ b); averaging the clones
    gives (a ⊗ a) ▷½ (b ⊗ b). They differ unless a == b.
    """
    half = LinearS(Fraction(1, 2))
    m = apply(half, a, b)
    return kron(m, m), apply(half, kron(a, a), kron(b, b))


# ---------------------------------------------------------------- literals

_MAT_RE = re.compile(r"^\[\[.*\]\]$")


def parse_rational(text: str) -> Fraction:
    return Fraction(text.strip())


def parse_colour(text: str) -> Colour:
    """Parse ``f0|f1|f2``, ``p/q`` or ``[[a,b],[c,d]]``."""
    t = text.strip().replace(" ", "")
    if t in ("f0", "f1", "f2"):
        return Fox3(int(t[1]))
    if _MAT_RE.match(t):
        body = t[2:-2].split("],[")
        rows = [[parse_rational(v) for v in r.split(",")] for r in body]
        return Mat.of(rows)
    try:
        return parse_rational(t)
    except (ValueError, ZeroDivisionError):
        raise ValueError(f"bad colour literal {text!r}") from None


def format_colour(x: Colour) -> str:
    if isinstance(x, Fraction):
        return _frac_str(x)
    return str(x)


def parse_op(text: str) -> OpLabel:
    t = text.strip()
    if t.startswith("lin:"):
        try:
            return LinearS(parse_rational(t[4:]))
        except (ValueError, ZeroDivisionError):
            raise ValueError(f"bad linear parameter in {text!r}") from None
    table = {
        "conj": Conj(),
        "conj-inv": Conj(True),
        "gconj": ConjGuarded(),
        "gconj-inv": ConjGuarded(True),
        "fox3": Fox3Op(),
        "belief": Deform(),
    }
    if t not in table:
        raise ValueError(f"unknown operation {text!r}")
    return table[t]


# ---------------------------------------------------------------- quagmas

CARRIERS = ("fox3", "rat", "mat2", "mat4", "belief")


@dataclass(frozen=True)
class Quagma:
    """A carrier kind with a family of operations and a structure class."""

    name: str
    carrier: str
    ops: tuple[OpLabel, ...]
    structure: str

    def __post_init__(self) -> None:
        if self.carrier not in CARRIERS:
            raise ValueError(f"unknown carrier {self.carrier}")
        if self.structure not in ("quandle", "quagma", "quandloid"):
            raise ValueError(f"unknown structure class {self.structure}")
        for op in self.ops:
            if not admits(self.carrier, op):
                raise KindError(f"{op} is not closed on {self.carrier}")


def admits(carrier: str, op: OpLabel) -> bool:
    """Whether ``op`` is closed on the carrier kind."""
    if isinstance(op, Fox3Op):
        return carrier == "fox3"
    if isinstance(op, LinearS):
        return carrier in ("rat", "mat2", "mat4")
    if isinstance(op, (Conj, ConjGuarded)):
        return carrier in ("mat2", "mat4")
    if isinstance(op, Deform):
        return carrier == "belief"
    return False


HALF = LinearS(Fraction(1, 2))
TWO = LinearS(Fraction(2))
NEG = LinearS(Fraction(-1))

FOX3 = Quagma("fox3", "fox3", (Fox3Op(),), "quandle")
LINEAR = Quagma("linear", "rat", (HALF, TWO, NEG), "quandle")
MIXED2X2 = Quagma("mixed2x2", "mat2", (HALF, TWO, ConjGuarded()), "quagma")
LINEAR2X2 = Quagma("linear2x2", "mat2", (HALF, TWO, NEG), "quandle")

QUAGMAS = {q.name: q for q in (FOX3, LINEAR, MIXED2X2, LINEAR2X2)}


def get_quagma(name: str) -> Quagma:
    try:
        return QUAGMAS[name]
    except KeyError:
        raise ValueError(f"unknown quagma {name!r}; choose from {sorted(QUAGMAS)}") from None


# ---------------------------------------------------------------- sampling

DEFAULT_SEED = 20150701


def sample_colour(carrier: str, rng: random.Random) -> Colour:
    if carrier == "fox3":
        return Fox3(rng.randrange(3))
    if carrier == "rat":
        return Fraction(rng.randint(-9, 9), rng.randint(1, 4))
    if carrier in ("mat2", "mat4"):
        n = 2 if carrier == "mat2" else 4
        while True:
            m = Mat.of([[Fraction(rng.randint(-4, 4), rng.randint(1, 3)) for _ in range(n)] for _ in range(n)])
            # keep a few singular samples so the det guard is exercised
            if m.det() != 0 or rng.random() < 0.1:
                return m
    raise KindError(f"cannot sample carrier {carrier}")


def sample_invertible(rng: random.Random) -> Mat:
    while True:
        m = Mat.of([[Fraction(rng.randint(-4, 4), rng.randint(1, 3)) for _ in range(2)] for _ in range(2)])
        if m.det() != 0:
            return m


def carrier_elements(carrier: str) -> list[Colour] | None:
    """All elements of a finite carrier, or None for infinite ones."""
    if carrier == "fox3":
        return [Fox3(r) for r in range(3)]
    return None


@dataclass(frozen=True)
class AxiomReport:
    axiom: str
    passed: bool
    checked: int
    witness: tuple | None = None

    def __str__(self) -> str:
        if self.passed:
            return f"{self.axiom}: pass ({self.checked} checks)"
        return f"{self.axiom}: fail witness={_fmt_witness(self.witness)}"


def _fmt_witness(w: tuple | None) -> str:
    if w is None:
        return "-"
    return "(" + ", ".join(format_colour(v) if not isinstance(v, (LinearS, Conj, ConjGuarded, Fox3Op)) else str(v) for v in w) + ")"


AXIOMS = ("idempotence", "reversibility", "self_distributivity", "mutual_distributivity")


def distributes(inner: OpLabel, outer: OpLabel, x: Colour, y: Colour, z: Colour) -> bool:
    """(x inner y) outer z == (x outer z) inner (y outer z)."""
    return apply(outer, apply(inner, x, y), z) == apply(inner, apply(outer, x, z), apply(outer, y, z))


def _triples(carrier: str, samples: int, rng: random.Random) -> Iterable[tuple]:
    elems = carrier_elements(carrier)
    if elems is not None:
        yield from product(elems, repeat=3)
        return
    for _ in range(samples):
        yield tuple(sample_colour(carrier, rng) for _ in range(3))


def check_axioms(q: Quagma, axiom: str, samples: int = 500, seed: int = DEFAULT_SEED) -> AxiomReport:
    """Search for a counterexample to ``axiom``; exhaustive on finite carriers."""
    if axiom not in AXIOMS:
        raise ValueError(f"unknown axiom {axiom!r}")
    if samples < 1:
        raise ValueError("sample budget must be at least 1")
    rng = random.Random(seed)
    checked = 0
    for x, y, z in _triples(q.carrier, samples, rng):
        for op in q.ops:
            if axiom == "idempotence":
                checked += 1
                if apply(op, x, x) != x:
                    return AxiomReport(axiom, False, checked, (op, x))
            elif axiom == "reversibility":
                checked += 1
                if apply(invert(op), apply(op, x, y), y) != x:
                    return AxiomReport(axiom, False, checked, (op, x, y))
            elif axiom == "self_distributivity":
                checked += 1
                if not distributes(op, op, x, y, z):
                    return AxiomReport(axiom, False, checked, (op, x, y, z))
            else:
                for other in q.ops:
                    if other == op:
                        continue
                    checked += 1
                    if not distributes(op, other, x, y, z):
                        return AxiomReport(axiom, False, checked, (op, other, x, y, z))
    return AxiomReport(axiom, True, checked)


def pair_distributes(q: Quagma, inner: OpLabel, outer: OpLabel, samples: int = 200, seed: int = DEFAULT_SEED) -> bool:
    """Empirical check that ``outer`` distributes over ``inner`` on the carrier."""
    rng = random.Random(seed)
    return all(distributes(inner, outer, x, y, z) for x, y, z in _triples(q.carrier, samples, rng))
