"""Atomic probability measures on the torus T = [0, 1) and their characters.

Atoms and weights are exact rationals.  Transcendental quantities are
evaluated with mpmath at a fixed 128-bit mantissa; the bulk window scans
(`l1_scan`) reduce every turn ``n*x mod 1`` exactly in integer arithmetic and
only then drop to float64, which keeps their absolute error near 1e-14.
Anything within `GUARD_BAND` of a threshold is re-evaluated at full
precision and reported as a boundary case.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass
from fractions import Fraction
from functools import lru_cache
from typing import Iterable, Sequence

import mpmath
import numpy as np

PREC_BITS = 128
PRECISION = 1e-12
GUARD_BAND = 1e-9

# exact equality cutoff used when a guard-band value is re-evaluated
_EXACT_TIE = mpmath.mpf(2) ** -100


def as_turn(x) -> Fraction:
    """Reduce a rational (or int / "p/q" string) to its representative in [0, 1)."""
    if isinstance(x, str):
        x = Fraction(x)
    if type(x) is Fraction and 0 <= x.numerator < x.denominator:
        return x
    return Fraction(x) % 1


def parse_rational(s) -> Fraction:
    if isinstance(s, float):
        raise TypeError("rationals must be given exactly, not as floats")
    return Fraction(s)


def rational_str(q: Fraction) -> str:
    q = Fraction(q)
    return f"{q.numerator}/{q.denominator}" if q.denominator != 1 else str(q.numerator)


def character_eval(n: int, x) -> Fraction:
    """Turn of e_n(x) = exp(2 pi i n x), i.e. ``n*x mod 1``."""
    return (int(n) * Fraction(x)) % 1


@lru_cache(maxsize=1 << 16)
def _cis(turn: Fraction) -> mpmath.mpc:
    with mpmath.workprec(PREC_BITS):
        t = 2 * mpmath.mpf(turn.numerator) / turn.denominator
        return mpmath.mpc(mpmath.cospi(t), mpmath.sinpi(t))


def _chord(turn: Fraction) -> mpmath.mpf:
    return _chord_nd(turn.numerator, turn.denominator)


# caches keyed on int pairs: hashing a Fraction costs a modular inverse
@lru_cache(maxsize=1 << 16)
def _chord_nd(num: int, den: int) -> mpmath.mpf:
    # |exp(2 pi i t) - 1| = 2 |sin(pi t)|
    with mpmath.workprec(PREC_BITS):
        return 2 * abs(mpmath.sinpi(mpmath.mpf(num) / den))


@lru_cache(maxsize=1 << 12)
def _weight_nd(num: int, den: int) -> mpmath.mpf:
    with mpmath.workprec(PREC_BITS):
        return mpmath.mpf(num) / den


def to_mpf(q) -> mpmath.mpf:
    if isinstance(q, float):
        return mpmath.mpf(q)
    q = Fraction(q)
    return mpmath.mpf(q.numerator) / q.denominator


def cis(turn) -> mpmath.mpc:
    return _cis(as_turn(turn))


def chord(turn) -> mpmath.mpf:
    """Chordal distance between exp(2 pi i turn) and 1."""
    return _chord(as_turn(turn))


@dataclass(frozen=True)
class AtomicMeasure:
    """Finite probability measure sum_j w_j delta_{x_j} on [0, 1).

    Points are strictly increasing exact rationals, weights are positive
    rationals summing to exactly one.
    """

    points: tuple[Fraction, ...]
    weights: tuple[Fraction, ...]

    def __post_init__(self):
        pts = tuple(Fraction(p) for p in self.points)
        ws = tuple(Fraction(w) for w in self.weights)
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "weights", ws)
        if not pts:
            raise ValueError("an atomic measure needs at least one atom")
        if len(pts) != len(ws):
            raise ValueError("points and weights differ in length")
        if any(not (0 <= p < 1) for p in pts):
            raise ValueError("atoms must lie in [0, 1)")
        if any(b <= a for a, b in zip(pts, pts[1:])):
            raise ValueError("atoms must be strictly increasing")
        if any(w <= 0 for w in ws):
            raise ValueError("weights must be positive")
        if sum(ws) != 1:
            raise ValueError(f"weights sum to {sum(ws)}, not 1")

    @classmethod
    def from_atoms(cls, atoms: Iterable[tuple]) -> "AtomicMeasure":
        pairs = sorted((as_turn(x), Fraction(w)) for x, w in atoms)
        return cls(tuple(p for p, _ in pairs), tuple(w for _, w in pairs))

    @classmethod
    def uniform(cls, points: Iterable) -> "AtomicMeasure":
        pts = sorted(as_turn(p) for p in points)
        w = Fraction(1, len(pts)) if pts else Fraction(0)
        return cls(tuple(pts), (w,) * len(pts))

    @classmethod
    def dirac(cls, x=0) -> "AtomicMeasure":
        return cls((as_turn(x),), (Fraction(1),))

    def __len__(self) -> int:
        return len(self.points)

    def __iter__(self):
        return iter(zip(self.points, self.weights))

    @property
    def continuity_defect(self) -> Fraction:
        """Largest atom weight; a continuous measure would have 0."""
        return max(self.weights)

    def index_of(self, x) -> int:
        x = as_turn(x)
        try:
            return self.points.index(x)
        except ValueError:
            raise KeyError(f"{x} is not an atom") from None

    def to_json(self) -> dict:
        return {"atoms": [{"x": rational_str(p), "w": rational_str(w)} for p, w in self]}

    @classmethod
    def from_json(cls, data: dict) -> "AtomicMeasure":
        try:
            atoms = [(parse_rational(a["x"]), parse_rational(a["w"])) for a in data["atoms"]]
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed measure JSON: {exc}") from exc
        return cls.from_atoms(atoms)


@dataclass(frozen=True)
class StepFunction:
    """Unimodular function on the atoms of `measure`, stored as rational turns."""

    measure: AtomicMeasure
    turns: tuple[Fraction, ...]

    def __post_init__(self):
        turns = tuple(as_turn(t) for t in self.turns)
        object.__setattr__(self, "turns", turns)
        if len(turns) != len(self.measure):
            raise ValueError("step function must assign every atom")

    @classmethod
    def constant(cls, measure: AtomicMeasure, turn=0) -> "StepFunction":
        return cls(measure, (as_turn(turn),) * len(measure))

    @classmethod
    def character(cls, measure: AtomicMeasure, m: int) -> "StepFunction":
        """e_m restricted to the atoms of `measure`."""
        return cls(measure, tuple(character_eval(m, x) for x in measure.points))

    def value(self, j: int) -> mpmath.mpc:
        return cis(self.turns[j])


def fourier(sigma: AtomicMeasure, n: int) -> mpmath.mpc:
    """sigma-hat(n) = sum_j w_j exp(2 pi i n x_j)."""
    # weights sharing a turn are summed exactly first, so sigma-hat(0) is exactly 1
    mass: dict[Fraction, Fraction] = {}
    for x, w in sigma:
        t = character_eval(n, x)
        mass[t] = mass.get(t, Fraction(0)) + w
    with mpmath.workprec(PREC_BITS):
        total = mpmath.mpc(0)
        for t, w in mass.items():
            total += (mpmath.mpf(w.numerator) / w.denominator) * _cis(t)
        return total


def _check_target(sigma: AtomicMeasure, f: StepFunction):
    if f.measure is not sigma and f.measure != sigma:
        if f.measure.points != sigma.points:
            raise ValueError("step function is defined on a different measure")


def l1_char_distance(sigma: AtomicMeasure, n: int, f: StepFunction) -> mpmath.mpf:
    """||e_n - f||_{L^1(sigma)} at 128-bit precision."""
    _check_target(sigma, f)
    with mpmath.workprec(PREC_BITS):
        total = mpmath.mpf(0)
        for (x, w), t in zip(sigma, f.turns):
            total += (mpmath.mpf(w.numerator) / w.denominator) * _chord((character_eval(n, x) - t) % 1)
        return total


def l1_step_distance(f: StepFunction, g: StepFunction) -> mpmath.mpf:
    """||f - g||_{L^1(sigma)} for two step functions on the same measure."""
    _check_target(f.measure, g)
    with mpmath.workprec(PREC_BITS):
        total = mpmath.mpf(0)
        for w, a, b in zip(f.measure.weights, f.turns, g.turns):
            if a != b:
                d = (a - b) % 1
                total += _weight_nd(w.numerator, w.denominator) * _chord_nd(d.numerator, d.denominator)
        return total


def rigidity_defect(sigma: AtomicMeasure, S: Sequence[int], target: StepFunction) -> list:
    """Residuals r_n = ||e_{s_n} - target||_{L^1(sigma)} along the enumeration S."""
    if len(S) == 0:
        raise ValueError("rigidity_defect needs a nonempty enumeration")
    return [l1_char_distance(sigma, s, target) for s in S]


def write_residual_csv(path, S: Sequence[int], residuals: Sequence) -> None:
    with open(path, "w", newline="") as fh:
        out = csv.writer(fh)
        out.writerow(["index", "n", "residual"])
        for i, (n, r) in enumerate(zip(S, residuals)):
            out.writerow([i, n, mpmath.nstr(r, 17)])


# -- vectorized scans -------------------------------------------------------

_INT64_SAFE = 1 << 62


def turn_differences(x: Fraction, t: Fraction, lo: int, hi: int) -> np.ndarray:
    """float64 array of ``(n*x - t) mod 1`` for n = lo..hi, reduced exactly."""
    x, t = Fraction(x), Fraction(t)
    den = x.denominator * t.denominator // math.gcd(x.denominator, t.denominator)
    P = x.numerator * (den // x.denominator)
    A = t.numerator * (den // t.denominator)
    span = max(abs(lo), abs(hi))
    if span * abs(P) + abs(A) < _INT64_SAFE and den < _INT64_SAFE:
        ns = np.arange(lo, hi + 1, dtype=np.int64)
        nums = np.mod(ns * P - A, den)
        return nums.astype(np.float64) / float(den)
    nums = (np.arange(lo, hi + 1).astype(object) * P - A) % den
    return np.array([v / den for v in nums], dtype=np.float64)


def l1_scan(sigma: AtomicMeasure, f: StepFunction, lo: int, hi: int) -> np.ndarray:
    """||e_n - f||_{L^1(sigma)} for every n in [lo, hi] (float64, error < 1e-13)."""
    _check_target(sigma, f)
    if hi < lo:
        return np.zeros(0)
    acc = np.zeros(hi - lo + 1)
    for (x, w), t in zip(sigma, f.turns):
        d = turn_differences(x, t, lo, hi)
        acc += float(w) * 2.0 * np.abs(np.sin(np.pi * d))
    return acc


def threshold_members(sigma: AtomicMeasure, f: StepFunction, lo: int, eps,
                      values: np.ndarray, guard: float = GUARD_BAND):
    """Classify ``values < eps`` exactly; returns (mask, boundary indices).

    Entries within `guard` of `eps` are recomputed at full precision; a value
    equal to `eps` up to 2^-100 is treated as equal and therefore excluded.
    """
    eps_f = float(eps)
    mask = values < eps_f
    near = np.nonzero(np.abs(values - eps_f) < guard)[0]
    with mpmath.workprec(PREC_BITS):
        e = to_mpf(eps)
        for i in near:
            v = l1_char_distance(sigma, lo + int(i), f)
            mask[i] = bool(v < e - _EXACT_TIE)
    return mask, [lo + int(i) for i in near]


def load_measure(path) -> AtomicMeasure:
    with open(path) as fh:
        return AtomicMeasure.from_json(json.load(fh))
