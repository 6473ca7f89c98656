"""Finite digit stages standing in for perfect Kronecker sets.

A stage of base ``b`` places its atoms at distinct scale levels,
``x_L = b**-L + delta_L`` for ``L = offset+1, ..., offset+r``.  Writing
``n = sum_L d_L b**(L-1)`` gives ``n*b**-L = d_L/b + (lower digits) mod 1``, so
the digits of an approximating character can be read off a quantized target
one level at a time.  The perturbations ``delta_L`` are bounded by
``b**-(offset+r+2)`` so that ``n*delta_L`` stays below ``b**-2`` for every
``n < b**(offset+r)``.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction

import mpmath
import numpy as np

from .torus import (
    PREC_BITS,
    AtomicMeasure,
    StepFunction,
    as_turn,
    chord,
    character_eval,
    l1_char_distance,
    l1_scan,
    parse_rational,
    rational_str,
)

MAX_LEVEL_BITS = 2048


class CertificationError(ArithmeticError):
    """The constructive approximant missed its certified error bound."""

    def __init__(self, message, atom_index=None):
        super().__init__(message)
        self.atom_index = atom_index


@dataclass(frozen=True)
class DigitStage:
    b: int
    r: int
    deltas: tuple[Fraction, ...]
    offset: int = 0
    label: str = ""

    def __post_init__(self):
        if self.b < 4:
            raise ValueError("base must be at least 4")
        if self.r < 1:
            raise ValueError("depth must be at least 1")
        if self.offset < 0:
            raise ValueError("offset must be nonnegative")
        deltas = tuple(Fraction(d) for d in self.deltas)
        object.__setattr__(self, "deltas", deltas)
        if len(deltas) != self.r:
            raise ValueError("need one perturbation per level")
        bound = Fraction(1, self.b ** (self.offset + self.r + 2))
        for L, d in zip(self.levels, deltas):
            if abs(d) >= bound:
                raise ValueError(f"perturbation at level {L} exceeds b^-(offset+r+2)")
        pts = [Fraction(1, self.b ** L) + d for L, d in zip(self.levels, deltas)]
        if any(not (0 <= p < 1) for p in pts) or len(set(pts)) != len(pts):
            raise ValueError("stage atoms must be distinct points of [0, 1)")

    @property
    def levels(self) -> range:
        return range(self.offset + 1, self.offset + self.r + 1)

    @property
    def level_atoms(self) -> tuple[Fraction, ...]:
        """Atoms in level order (coarsest first)."""
        return tuple(Fraction(1, self.b ** L) + d for L, d in zip(self.levels, self.deltas))

    @property
    def atoms(self) -> tuple[Fraction, ...]:
        """Atoms sorted increasingly (finest level first)."""
        return tuple(sorted(self.level_atoms))

    @property
    def perturbed(self) -> bool:
        return any(self.deltas)

    def measure(self) -> AtomicMeasure:
        return AtomicMeasure.uniform(self.level_atoms)

    def level_of_atom(self) -> list[int]:
        """Level of each atom in sorted order."""
        by_point = dict(zip(self.level_atoms, self.levels))
        return [by_point[x] for x in self.atoms]


def build_stage(b: int, r: int, perturb_seed: int | None = None, offset: int = 0,
                label: str = "") -> DigitStage:
    """Digit stage with atoms b^-L (+ seeded rational jitter when a seed is given)."""
    if b < 4 or r < 1:
        raise ValueError("need b >= 4 and r >= 1")
    if (offset + r) * math.log2(b) > MAX_LEVEL_BITS:
        raise OverflowError(f"b^(offset+r) exceeds 2^{MAX_LEVEL_BITS}")
    if perturb_seed is None:
        deltas = (Fraction(0),) * r
    else:
        rng = random.Random(perturb_seed)
        den = b ** (offset + r + 4)
        deltas = tuple(Fraction(rng.randrange(-(b * b - 1), b * b), den) for _ in range(r))
    return DigitStage(b, r, deltas, offset, label)


@dataclass(frozen=True)
class Approximant:
    n: int
    digits: tuple[int, ...]
    sup_error: mpmath.mpf
    bound: mpmath.mpf
    l1_error: mpmath.mpf


def certified_bound(b: int, r: int) -> mpmath.mpf:
    """Chordal sup-error bound 2 sin(pi (1/b + r/b^2))."""
    with mpmath.workprec(PREC_BITS):
        return 2 * mpmath.sinpi(mpmath.mpf(1) / b + mpmath.mpf(r) / (b * b))


def constructive_approximant(stage: DigitStage, target: StepFunction) -> Approximant:
    """Character e_n approximating a target quantized to multiples of 1/b.

    Digits are chosen coarsest level first, each rounded to the nearest
    multiple of 1/b (halves round up).  The achieved sup error is evaluated
    on the actual (perturbed) atoms and must beat `certified_bound` plus
    1e-9, otherwise `CertificationError` is raised.
    """
    b = stage.b
    sigma = stage.measure()
    if target.measure.points != sigma.points:
        raise ValueError("target must live on the stage's atoms")
    if any((t * b).denominator != 1 for t in target.turns):
        raise ValueError("target turns must be multiples of 1/b")
    by_point = dict(zip(sigma.points, target.turns))
    digits = []
    n = 0
    for L, x0 in zip(stage.levels, (Fraction(1, b ** L) for L in stage.levels)):
        # turn contributed by the already chosen digits at this level
        carry = (n * x0) % 1
        t = by_point[Fraction(1, b ** L) + stage.deltas[L - stage.offset - 1]]
        d = math.floor((t - carry) * b + Fraction(1, 2)) % b
        digits.append(d)
        n += d * b ** (L - 1)
    errs = [chord(character_eval(n, x) - t) for x, t in zip(sigma.points, target.turns)]
    sup = max(errs)
    bound = certified_bound(b, stage.r)
    with mpmath.workprec(PREC_BITS):
        if not sup < bound + mpmath.mpf("1e-9"):
            worst = max(range(len(errs)), key=errs.__getitem__)
            raise CertificationError(f"sup error {mpmath.nstr(sup, 12)} exceeds bound "
                                     f"{mpmath.nstr(bound, 12)}", atom_index=worst)
    return Approximant(n, tuple(digits), sup, bound, l1_char_distance(sigma, n, target))


def best_character_scan(sigma: AtomicMeasure, target: StepFunction, lo: int, hi: int):
    """argmin of ||e_n - target||_{L^1(sigma)} over lo <= n <= hi.

    Ties go to the smallest |n|, then to the negative one.  Near-ties from the
    float scan are settled at full precision.
    """
    if hi < lo:
        raise ValueError("empty scan range")
    vals = l1_scan(sigma, target, lo, hi)
    best = float(vals.min())
    cand = [lo + int(i) for i in np.nonzero(vals <= best + 1e-9)[0]]
    exact = [(l1_char_distance(sigma, n, target), n) for n in cand]
    lowest = min(v for v, _ in exact)
    with mpmath.workprec(PREC_BITS):
        tied = [n for v, n in exact if v - lowest < mpmath.mpf(2) ** -100]
    n = min(tied, key=lambda k: (abs(k), k))
    return n, l1_char_distance(sigma, n, target)


@dataclass(frozen=True)
class EqualPartition:
    measure: AtomicMeasure
    cells: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        r = len(self.cells)
        seen = sorted(i for c in self.cells for i in c)
        if seen != list(range(len(self.measure))):
            raise ValueError("cells must partition the atom indices")
        for c in self.cells:
            if sum(self.measure.weights[i] for i in c) != Fraction(1, r):
                raise ValueError("every cell must carry weight exactly 1/r")

    @property
    def r(self) -> int:
        return len(self.cells)

    def cell_of(self) -> list[int]:
        owner = [0] * len(self.measure)
        for j, c in enumerate(self.cells):
            for i in c:
                owner[i] = j
        return owner


def equal_partition(sigma: AtomicMeasure, r: int) -> EqualPartition:
    """Split the atoms, in order, into r consecutive groups of weight exactly 1/r."""
    if r < 1:
        raise ValueError("r must be positive")
    share = Fraction(1, r)
    cells, cur, acc = [], [], Fraction(0)
    for i, w in enumerate(sigma.weights):
        cur.append(i)
        acc += w
        if acc == share:
            cells.append(tuple(cur))
            cur, acc = [], Fraction(0)
        elif acc > share:
            raise ValueError(f"atom weights cannot be packed into {r} cells of weight 1/{r}")
    if cur or len(cells) != r:
        raise ValueError(f"atom weights cannot be packed into {r} cells of weight 1/{r}")
    return EqualPartition(sigma, tuple(cells))


# -- block family -----------------------------------------------------------

def block_order(M: int) -> list[int]:
    """0, -1, 1, -2, 2, ...: heavier blocks get the coarser digit bands."""
    return sorted(range(-M, M + 1), key=lambda m: (abs(m), m))


@dataclass(frozen=True)
class KroneckerFamily:
    b: int
    r: int
    M: int
    seed: int | None
    blocks: dict = field(hash=False)           # m -> DigitStage
    block_measures: dict = field(hash=False)   # m -> AtomicMeasure
    block_weights: dict = field(hash=False)    # m -> Fraction (mixture share)
    mixture: AtomicMeasure = None
    target: StepFunction = None

    def block_atom_indices(self, m: int) -> list[int]:
        pts = set(self.blocks[m].atoms)
        return [i for i, x in enumerate(self.mixture.points) if x in pts]

    def to_json(self) -> dict:
        data = self.mixture.to_json()
        data["params"] = {"b": self.b, "r": self.r, "M": self.M, "seed": self.seed}
        data["blocks"] = [{"m": m, "atom_indices": self.block_atom_indices(m)}
                          for m in range(-self.M, self.M + 1)]
        data["target"] = [{"atom": i, "turn": rational_str(t)}
                          for i, t in enumerate(self.target.turns)]
        return data

    @classmethod
    def from_json(cls, data: dict) -> "KroneckerFamily":
        try:
            p = data["params"]
            fam = build_family(int(p["b"]), int(p["r"]), int(p["M"]), p.get("seed"))
            mixture = AtomicMeasure.from_json(data)
            turns = [parse_rational(t["turn"]) for t in sorted(data["target"], key=lambda t: t["atom"])]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed family JSON: {exc}") from exc
        if mixture != fam.mixture or tuple(as_turn(t) for t in turns) != fam.target.turns:
            raise ValueError("family JSON does not match its own construction parameters")
        return fam


def build_family(b: int, r: int, M: int, seed: int | None = None) -> KroneckerFamily:
    """2M+1 disjoint stages K_m, their mixture and the target f with f|K_m = e_m.

    Block m occupies its own band of r digit levels; the bands are handed out
    in `block_order`, so K_0 is the coarsest.  Mixture weights are
    2^-|m| renormalized over |m| <= M.
    """
    if M < 0:
        raise ValueError("M must be nonnegative")
    blocks = {}
    for k, m in enumerate(block_order(M)):
        s = None if seed is None else seed * 1_000_003 + (m + M)
        blocks[m] = build_stage(b, r, s, offset=k * r, label=f"K_{m}")
    seen = set()
    for st in blocks.values():
        if seen & set(st.atoms):
            raise ValueError("blocks collide")
        seen |= set(st.atoms)
    raw = {m: Fraction(1, 2 ** abs(m)) for m in blocks}
    total = sum(raw.values())
    weights = {m: raw[m] / total for m in sorted(blocks)}
    atoms = []
    for m in sorted(blocks):
        for x in blocks[m].atoms:
            atoms.append((x, weights[m] / r, m))
    atoms.sort()
    mixture = AtomicMeasure(tuple(a[0] for a in atoms), tuple(a[1] for a in atoms))
    target = StepFunction(mixture, tuple(character_eval(m, x) for x, _, m in atoms))
    return KroneckerFamily(b, r, M, seed, blocks,
                           {m: blocks[m].measure() for m in sorted(blocks)},
                           weights, mixture, target)
