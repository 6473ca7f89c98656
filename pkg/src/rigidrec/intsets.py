"""Sets of integers: periodic sets with exact density, finite windows, Bohr proxies."""

from __future__ import annotations

import math
from dataclasses import dataclass
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .torus import as_turn


def _canonical(N: int, residues: frozenset) -> tuple[int, frozenset]:
    for d in range(1, N + 1):
        if N % d:
            continue
        if all(((a + d) % N) in residues for a in residues):
            return d, frozenset(a for a in residues if a < d)
    return N, residues


@dataclass(frozen=True)
class PeriodicSet:
    """{n : n mod N in residues}, always stored with its minimal period."""

    N: int
    residues: frozenset

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("modulus must be positive")
        res = frozenset(int(a) % self.N for a in self.residues)
        if any(not (0 <= int(a) < self.N) for a in self.residues):
            raise ValueError("residues must lie in [0, N)")
        N, res = _canonical(self.N, res)
        object.__setattr__(self, "N", N)
        object.__setattr__(self, "residues", res)

    @classmethod
    def of(cls, N: int, residues: Iterable[int]) -> "PeriodicSet":
        return cls(N, frozenset(int(a) % N for a in residues))

    @classmethod
    def integers(cls) -> "PeriodicSet":
        return cls(1, frozenset({0}))

    @classmethod
    def empty(cls) -> "PeriodicSet":
        return cls(1, frozenset())

    @classmethod
    def parse(cls, spec: str) -> "PeriodicSet":
        """'N:r1,r2,...' (e.g. '2:0' for the even numbers)."""
        try:
            N, rest = spec.split(":")
            res = [int(a) for a in rest.split(",") if a.strip()]
            return cls.of(int(N), res)
        except ValueError as exc:
            raise ValueError(f"bad periodic set {spec!r}; expected N:r1,r2,...") from exc

    def __contains__(self, n: int) -> bool:
        return int(n) % self.N in self.residues

    def __bool__(self) -> bool:
        return bool(self.residues)

    def sorted_residues(self) -> list[int]:
        return sorted(self.residues)

    def _lift(self, L: int) -> set:
        return {a + j * self.N for a in self.residues for j in range(L // self.N)}

    def intersect(self, other: "PeriodicSet") -> "PeriodicSet":
        L = math.lcm(self.N, other.N)
        return PeriodicSet.of(L, self._lift(L) & other._lift(L))

    def union(self, other: "PeriodicSet") -> "PeriodicSet":
        L = math.lcm(self.N, other.N)
        return PeriodicSet.of(L, self._lift(L) | other._lift(L))

    def shift(self, n: int) -> "PeriodicSet":
        """A + n."""
        return PeriodicSet.of(self.N, (a + n for a in self.residues))

    def members_in(self, lo: int, hi: int) -> list[int]:
        return [n for n in range(lo, hi + 1) if n % self.N in self.residues]

    def to_json(self) -> dict:
        return {"periodic": {"N": self.N, "residues": self.sorted_residues()}}


class WindowSet:
    """Finite set of integers given by a membership array starting at `offset`."""

    def __init__(self, offset: int, bits):
        self.offset = int(offset)
        self.bits = np.asarray(bits, dtype=bool).copy()
        self.bits.setflags(write=False)

    @classmethod
    def from_members(cls, members: Iterable[int], lo: int | None = None, hi: int | None = None) -> "WindowSet":
        members = sorted(set(int(n) for n in members))
        if lo is None:
            lo = members[0] if members else 0
        if hi is None:
            hi = members[-1] if members else lo - 1
        bits = np.zeros(max(0, hi - lo + 1), dtype=bool)
        for n in members:
            if not lo <= n <= hi:
                raise ValueError(f"{n} lies outside the window [{lo}, {hi}]")
            bits[n - lo] = True
        return cls(lo, bits)

    @classmethod
    def interval(cls, lo: int, hi: int) -> "WindowSet":
        return cls(lo, np.ones(hi - lo + 1, dtype=bool))

    @property
    def lo(self) -> int:
        return self.offset

    @property
    def hi(self) -> int:
        return self.offset + len(self.bits) - 1

    def members(self) -> list[int]:
        return (np.nonzero(self.bits)[0] + self.offset).tolist()

    def __iter__(self):
        return iter(self.members())

    def __len__(self) -> int:
        return int(self.bits.sum())

    def __contains__(self, n: int) -> bool:
        i = int(n) - self.offset
        return 0 <= i < len(self.bits) and bool(self.bits[i])

    def __eq__(self, other) -> bool:
        return isinstance(other, WindowSet) and self.members() == other.members()

    def translate(self, m: int) -> "WindowSet":
        return WindowSet(self.offset + m, self.bits)

    def restrict(self, lo: int, hi: int) -> "WindowSet":
        return WindowSet.from_members([n for n in self.members() if lo <= n <= hi], lo, hi)

    def density_estimate(self) -> tuple[Fraction, int]:
        """(|S|/window length, window length); not an upper Banach density."""
        L = len(self.bits)
        return (Fraction(len(self), L) if L else Fraction(0)), L

    def to_json(self) -> dict:
        packed = np.packbits(self.bits, bitorder="little")
        return {"window": {"offset": self.offset, "length": int(len(self.bits)),
                           "bits": packed.tobytes().hex()}}

    @classmethod
    def from_json(cls, data: dict) -> "WindowSet":
        w = data["window"]
        raw = np.frombuffer(bytes.fromhex(w["bits"]), dtype=np.uint8)
        bits = np.unpackbits(raw, bitorder="little")
        length = int(w.get("length", len(bits)))
        return cls(int(w["offset"]), bits[:length].astype(bool))

    def __repr__(self) -> str:
        return f"WindowSet(offset={self.offset}, size={len(self)}, length={len(self.bits)})"


def set_from_json(data: dict):
    if "periodic" in data:
        p = data["periodic"]
        return PeriodicSet.of(int(p["N"]), p["residues"])
    if "window" in data:
        return WindowSet.from_json(data)
    raise ValueError("set JSON needs a 'periodic' or 'window' key")


def density(A: PeriodicSet) -> Fraction:
    """Upper Banach density; for a periodic set every Folner limit equals |residues|/N."""
    return Fraction(len(A.residues), A.N)


def hit_counts(A: PeriodicSet, F: Iterable[int]) -> list[int]:
    """|(A - n) & F| for n = 0, ..., N-1."""
    F = sorted(set(F))
    return [sum(1 for f in F if (f + n) % A.N in A.residues) for n in range(A.N)]


def translate_hitting(A: PeriodicSet, F: Iterable[int]) -> int:
    """Smallest n in [0, N) with |(A - n) & F| >= d*(A) |F|."""
    F = sorted(set(F))
    if not F or not A:
        raise ValueError("A and F must be nonempty")
    need = density(A) * len(F)
    for n, c in enumerate(hit_counts(A, F)):
        if c >= need:
            return n
    raise AssertionError("pigeonhole failed; the periodic representation is corrupt")


@dataclass
class DeltaAudit:
    delta: Fraction
    passes: list             # (F, n, count) for every F at delta = d*(A)
    delta_prime: Fraction | None
    failures: list           # (F, max count) failing at delta_prime
    witness: tuple | None

    @property
    def sharp(self) -> bool:
        return self.delta_prime is None or bool(self.failures)


def largest_delta_audit(A: PeriodicSet, families: Sequence[Iterable[int]]) -> DeltaAudit:
    """Check that d*(A) works for every F and that d*(A) + 1/(N max|F|) fails for one.

    When no given F fails, the interval {0, ..., N*L - 1} with L = max|F| is
    tried; on it every translate meets A exactly d*(A)*N*L times, so it
    always fails.
    """
    fams = [tuple(sorted(set(F))) for F in families]
    d = density(A)
    passes = []
    for F in fams:
        n = translate_hitting(A, F)
        passes.append((F, n, hit_counts(A, F)[n]))
    if d == 1:
        return DeltaAudit(d, passes, None, [], None)
    L = max((len(F) for F in fams), default=1)
    dp = d + Fraction(1, A.N * L)
    canon = tuple(range(A.N * L))
    failures = []
    for F in fams:
        top = max(hit_counts(A, F))
        if top < dp * len(F):
            failures.append((F, top))
    if not failures:
        failures.append((canon, max(hit_counts(A, canon))))
        assert failures[0][1] < dp * len(canon)
    witness = max(failures, key=lambda fc: len(fc[0]))[0] if failures else None
    return DeltaAudit(d, passes, dp, failures, witness)


def difference_set(A):
    """A - A; for a window the result is the exact difference set of the finite set."""
    if isinstance(A, PeriodicSet):
        if not A:
            raise ValueError("difference set of the empty set")
        return PeriodicSet.of(A.N, {(a - b) % A.N for a in A.residues for b in A.residues})
    members = A.members()
    if not members:
        raise ValueError("difference set of the empty set")
    span = A.hi - A.lo
    # correlation of the indicator with itself; entry span + d counts pairs with a - b = d
    c = np.correlate(A.bits.astype(np.int64), A.bits.astype(np.int64), mode="full")
    return WindowSet(-span, c > 0)


def weyl_sum(S: Sequence[int], alpha) -> float:
    """|(1/|S|) sum_{n in S} exp(2 pi i n alpha)|; alpha is reduced exactly."""
    S = list(S)
    if not S:
        raise ValueError("S must be nonempty")
    a = Fraction(alpha)
    P, Q = a.numerator, a.denominator
    ns = np.asarray(S, dtype=object)
    turns = np.array([(int(n) * P % Q) / Q for n in ns], dtype=np.float64)
    z = np.exp(2j * np.pi * turns).sum() / len(S)
    return float(abs(z))


@dataclass(frozen=True)
class BohrProxy:
    """Finite intersection of sets {n : n alpha_i in arc_i}.

    Each arc is an open interval (lo, hi) of the circle; lo > hi means the arc
    wraps through 0.
    """

    frequencies: tuple

    def __post_init__(self):
        freqs = []
        for alpha, (lo, hi) in self.frequencies:
            lo, hi = as_turn(Fraction(lo)), as_turn(Fraction(hi))
            length = (hi - lo) % 1
            if lo == hi or not (0 < length < 1):
                raise ValueError("arcs must be nonempty proper open arcs")
            freqs.append((Fraction(alpha), (lo, hi)))
        object.__setattr__(self, "frequencies", tuple(freqs))

    def contains(self, n: int) -> bool:
        for alpha, (lo, hi) in self.frequencies:
            t = (n * alpha) % 1
            inside = lo < t < hi if lo < hi else (t > lo or t < hi)
            if not inside:
                return False
        return True


def bohr_hit_test(S: WindowSet, proxy: BohrProxy) -> tuple[bool, int | None]:
    """Does S meet the Bohr proxy?  Returns the smallest member that does."""
    for n in S.members():
        if proxy.contains(n):
            return True, n
    return False, None
