"""Finite measure-preserving systems: a permutation of {0..n-1} with uniform measure.

Convention: T^n D is the forward image of D.  Correlations are computed as
``|{x in D : T^n x in D}| / n``, which equals mu(D & T^-n D) = mu(T^n D & D)
by invariance of the uniform measure.
"""

from __future__ import annotations

import hashlib
import json
import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from functools import cached_property
from typing import Iterable, Sequence

from .intsets import PeriodicSet, WindowSet, density, difference_set

MAX_PRODUCT_SIZE = 1 << 20


class FinitePermSystem:
    def __init__(self, perm: Sequence[int]):
        perm = tuple(int(p) for p in perm)
        if not perm:
            raise ValueError("a system needs at least one point")
        if sorted(perm) != list(range(len(perm))):
            raise ValueError("perm is not a bijection of {0, ..., n-1}")
        self.perm = perm

    @classmethod
    def cyclic(cls, n: int) -> "FinitePermSystem":
        """Rotation x -> x + 1 mod n."""
        return cls([(i + 1) % n for i in range(n)])

    @classmethod
    def trivial(cls) -> "FinitePermSystem":
        return cls([0])

    @property
    def size(self) -> int:
        return len(self.perm)

    def __repr__(self) -> str:
        return f"FinitePermSystem(size={self.size}, cycles={self.cycle_type()})"

    def __eq__(self, other) -> bool:
        return isinstance(other, FinitePermSystem) and self.perm == other.perm

    def __hash__(self) -> int:
        return hash(self.perm)

    @cached_property
    def cycles(self) -> list[list[int]]:
        seen = [False] * self.size
        out = []
        for s in range(self.size):
            if seen[s]:
                continue
            cyc, x = [], s
            while not seen[x]:
                seen[x] = True
                cyc.append(x)
                x = self.perm[x]
            out.append(cyc)
        return out

    @cached_property
    def _position(self) -> list[tuple[int, int]]:
        pos = [(0, 0)] * self.size
        for c, cyc in enumerate(self.cycles):
            for i, x in enumerate(cyc):
                pos[x] = (c, i)
        return pos

    def cycle_type(self) -> list[int]:
        return sorted(len(c) for c in self.cycles)

    @property
    def order(self) -> int:
        """Order of the permutation (lcm of the cycle lengths)."""
        return math.lcm(*(len(c) for c in self.cycles))

    @property
    def is_cyclic(self) -> bool:
        return len(self.cycles) == 1

    def power(self, x: int, n: int) -> int:
        """T^n x for any integer n."""
        c, i = self._position[x]
        cyc = self.cycles[c]
        return cyc[(i + n) % len(cyc)]

    def orbit(self, x: int) -> list[int]:
        c, i = self._position[x]
        cyc = self.cycles[c]
        return cyc[i:] + cyc[:i]

    def image(self, D: Iterable[int], n: int = 1) -> frozenset:
        return frozenset(self.power(x, n) for x in D)

    def to_json(self, D: Iterable[int] | None = None) -> dict:
        data = {"size": self.size, "perm": list(self.perm)}
        if D is not None:
            data["D"] = sorted(D)
        return data

    @classmethod
    def from_json(cls, data: dict) -> "FinitePermSystem":
        try:
            sys_ = cls(data["perm"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed system JSON: {exc}") from exc
        if int(data.get("size", sys_.size)) != sys_.size:
            raise ValueError("size does not match perm")
        return sys_


def _check_subset(sys: FinitePermSystem, D) -> frozenset:
    D = frozenset(int(x) for x in D)
    if any(not (0 <= x < sys.size) for x in D):
        raise ValueError("D is not a subset of the ground set")
    return D


def measure(sys: FinitePermSystem, D) -> Fraction:
    return Fraction(len(_check_subset(sys, D)), sys.size)


@dataclass(frozen=True)
class MarkedSet:
    system: FinitePermSystem
    points: frozenset

    def __post_init__(self):
        object.__setattr__(self, "points", _check_subset(self.system, self.points))

    @property
    def measure(self) -> Fraction:
        return Fraction(len(self.points), self.system.size)


def correlation(sys: FinitePermSystem, D, n: int) -> Fraction:
    """mu(D & T^n D) as an exact rational."""
    D = _check_subset(sys, D)
    return Fraction(sum(1 for x in D if sys.power(x, n) in D), sys.size)


class _CorrelationTable:
    """n -> mu(D & T^n D), tabulated over one period of the permutation."""

    def __init__(self, sys: FinitePermSystem, D):
        self.sys = sys
        self.D = _check_subset(sys, D)
        self.period = sys.order
        self.values = [correlation(sys, self.D, n) for n in range(self.period)]

    def __call__(self, n: int) -> Fraction:
        return self.values[n % self.period]


def _by_magnitude(S: Iterable[int]) -> list[int]:
    return sorted(set(int(n) for n in S), key=lambda n: (abs(n), n))


def recurrence_witness(S: Iterable[int], sys: FinitePermSystem, D) -> int | None:
    """Smallest n in S (by |n|, negative first) with mu(D & T^n D) > 0."""
    D = _check_subset(sys, D)
    if not D:
        raise ValueError("D must have positive measure")
    table = _CorrelationTable(sys, D)
    for n in _by_magnitude(S):
        if table(n) > 0:
            return n
    return None


# -- batteries --------------------------------------------------------------

@dataclass(frozen=True)
class BatteryInstance:
    system: FinitePermSystem
    D: frozenset
    min_measure: Fraction = Fraction(0)
    label: str = ""

    def __post_init__(self):
        object.__setattr__(self, "D", _check_subset(self.system, self.D))
        object.__setattr__(self, "min_measure", Fraction(self.min_measure))
        if self.measure < self.min_measure:
            raise ValueError(f"instance {self.label!r}: mu(D) below its declared minimum")

    @property
    def measure(self) -> Fraction:
        return Fraction(len(self.D), self.system.size)

    @cached_property
    def return_residues(self) -> frozenset:
        """R_0(D) reduced mod the order of T."""
        table = _CorrelationTable(self.system, self.D)
        return frozenset(n for n in range(table.period) if table.values[n] > 0)

    def recurs_at(self, n: int) -> bool:
        return n % self.system.order in self.return_residues

    def to_json(self) -> dict:
        data = self.system.to_json(self.D)
        data["delta"] = str(self.min_measure)
        data["label"] = self.label
        return data

    @classmethod
    def from_json(cls, data: dict) -> "BatteryInstance":
        sys_ = FinitePermSystem.from_json(data)
        try:
            return cls(sys_, frozenset(data["D"]), Fraction(data.get("delta", "0")), data.get("label", ""))
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed battery instance: {exc}") from exc


class Battery(list):
    """List of BatteryInstance, standing in for "every system" in certificates."""

    def to_json(self) -> list:
        return [inst.to_json() for inst in self]

    @classmethod
    def from_json(cls, data: list) -> "Battery":
        if not isinstance(data, list):
            raise ValueError("battery JSON must be a list of instances")
        return cls(BatteryInstance.from_json(d) for d in data)

    def digest(self) -> str:
        blob = json.dumps(self.to_json(), sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(blob.encode()).hexdigest()[:16]


@dataclass
class Certificate:
    delta: Fraction
    witnesses: list = field(default_factory=list)     # (instance index, n)
    skipped: list = field(default_factory=list)       # instances with mu(D) <= delta
    counterexample: int | None = None                 # failing instance index

    @property
    def passed(self) -> bool:
        return self.counterexample is None

    def to_json(self) -> dict:
        return {"delta": str(self.delta), "passed": self.passed,
                "witnesses": [list(w) for w in self.witnesses],
                "skipped": self.skipped, "counterexample": self.counterexample}


def delta_recurrence_certify(S: Iterable[int], battery: Sequence[BatteryInstance], delta) -> Certificate:
    """Certify that S is a set of delta-recurrence for every battery instance.

    Only instances with mu(D) > delta fall under the hypothesis; the others
    are listed as skipped.  The first instance without a witness in S is
    returned as the counterexample.
    """
    delta = Fraction(delta)
    order = _by_magnitude(S)
    cert = Certificate(delta)
    for i, inst in enumerate(battery):
        if not inst.measure > delta:
            cert.skipped.append(i)
            continue
        hit = next((n for n in order if inst.recurs_at(n)), None)
        if hit is None:
            cert.counterexample = i
            return cert
        cert.witnesses.append((i, hit))
    return cert


# -- recurrence profiles ----------------------------------------------------

@dataclass
class StrongRecurrenceProfile:
    values: list
    tail_sup: Fraction


def strong_recurrence_profile(S: Sequence[int], sys: FinitePermSystem, D, m: int = 0) -> StrongRecurrenceProfile:
    """c_n = mu(D & T^(s_n + m) D) and its sup over the last quarter of the list."""
    if not len(S):
        raise ValueError("S must be nonempty")
    table = _CorrelationTable(sys, D)
    vals = [table(s + m) for s in S]
    tail = vals[len(vals) - max(1, math.ceil(len(vals) / 4)):]
    return StrongRecurrenceProfile(vals, max(tail))


def rohlin_split(sys: FinitePermSystem, eps) -> MarkedSet:
    """Every second point along the single cycle, so that D & TD is empty.

    mu(D) = 1/2 for even size and (M-1)/(2M) for odd size M, which meets
    (1 - eps)/2 exactly when M >= 1/eps.
    """
    if not sys.is_cyclic:
        raise ValueError("rohlin_split needs a single-cycle system")
    M = sys.size
    eps = Fraction(eps) if not isinstance(eps, float) else eps
    if M < 2:
        raise ValueError("system too small: needs at least two points")
    cycle = sys.orbit(0)
    pts = cycle[0:M - (M % 2):2]
    D = MarkedSet(sys, frozenset(pts))
    if D.measure < (1 - eps) / 2:
        raise ValueError(f"cycle length {M} too small for eps={eps} (need M >= 1/eps)")
    assert not (D.points & sys.image(D.points)), "D meets TD"
    return D


def orbit_return_set(sys: FinitePermSystem, D, x: int) -> PeriodicSet:
    """A = {m : T^m x in D}, periodic with period the orbit length of x."""
    D = _check_subset(sys, D)
    orb = sys.orbit(x)
    L = len(orb)
    A = PeriodicSet.of(L, [m for m in range(L) if orb[m] in D])
    if L == sys.size:
        for n in range(L):
            lhs = density(A.intersect(A.shift(-n)))
            assert lhs == correlation(sys, D, n), f"return-set identity fails at n={n}"
    return A


def correspondence_forward(A: PeriodicSet):
    """Cyclic rotation on Z/N with D = residues; returns (system, D).

    Checks d*(A & (A - m)) == mu(D & T^-m D) for every m in [0, N).
    """
    if not A:
        raise ValueError("A must be nonempty")
    sys = FinitePermSystem.cyclic(A.N)
    D = frozenset(A.residues)
    for m in range(A.N):
        lhs = density(A.intersect(A.shift(-m)))
        rhs = Fraction(sum(1 for x in D if sys.power(x, m) in D), A.N)
        assert lhs == rhs, f"correspondence fails at m={m}"
    return sys, D


def correspondence_reverse(sys: FinitePermSystem, D) -> PeriodicSet:
    """Return set A of the orbit richest in D, with d*(A) >= mu(D) and A - A in R_0(D)."""
    D = _check_subset(sys, D)
    if not D:
        raise ValueError("D must have positive measure")
    best = max(sys.cycles, key=lambda c: (Fraction(sum(1 for y in c if y in D), len(c)), -min(c)))
    x = min(y for y in best if y in D)
    A = orbit_return_set(sys, D, x)
    assert density(A) >= measure(sys, D)
    diff = difference_set(A)
    table = _CorrelationTable(sys, D)
    for m in range(math.lcm(diff.N, table.period)):
        if m in diff:
            assert table(m) > 0, f"A - A contains {m} outside R_0(D)"
    return A


def product(X: FinitePermSystem, Y: FinitePermSystem) -> FinitePermSystem:
    """T x R on X x Y; the point (x, y) has index x * |Y| + y."""
    n = X.size * Y.size
    if n > MAX_PRODUCT_SIZE:
        raise OverflowError(f"product size {n} exceeds {MAX_PRODUCT_SIZE}")
    return FinitePermSystem([X.perm[x] * Y.size + Y.perm[y]
                             for x in range(X.size) for y in range(Y.size)])


def ergodic_union_check(S: Iterable[int], sys: FinitePermSystem, D) -> tuple[Fraction, bool]:
    """mu(union of T^n D over n in S) and whether it equals 1."""
    D = _check_subset(sys, D)
    if not D:
        raise ValueError("D must have positive measure")
    covered = set()
    for n in {int(n) % sys.order for n in S}:
        covered |= sys.image(D, n)
    mu = Fraction(len(covered), sys.size)
    return mu, mu == 1


@dataclass
class ShiftAudit:
    count: int
    nested_counts: list
    growing: bool


def shift_infinite_audit(S: WindowSet, A: PeriodicSet, n0: int, levels: int = 4) -> ShiftAudit:
    """|S & (n0 + A - A)| in the window, plus counts on nested sub-windows.

    The sub-windows shrink by halves around the window's centre; `growing`
    says the counts never decrease as the window widens.
    """
    target = difference_set(A).shift(n0)
    members = [n for n in S.members() if n in target]
    lo, hi = S.lo, S.hi
    centre = (lo + hi) // 2
    nested = []
    for j in range(levels - 1, -1, -1):
        half = ((hi - lo) // 2) >> j
        a, b = (lo, hi) if j == 0 else (centre - half, centre + half)
        nested.append(sum(1 for n in members if a <= n <= b))
    return ShiftAudit(len(members), nested, all(x <= y for x, y in zip(nested, nested[1:])))


def avoidance_system(F: Iterable[int], n0: int):
    """Cyclic rotation R and E = {0} with E & R^(m - n0) E empty for all m in F.

    Finite-scale stand-in for the totally ergodic factor used when showing
    S & (n0 + A - A) is infinite: any cycle longer than max |m - n0| works.
    """
    F = list(F)
    if n0 in F:
        raise ValueError("n0 must lie outside F")
    L = max((abs(m - n0) for m in F), default=0) + 1
    R = FinitePermSystem.cyclic(max(L, 2))
    E = frozenset({0})
    assert all(not (E & R.image(E, m - n0)) for m in F)
    return R, E


def optimal_recurrence_average(S: Iterable[int], sys: FinitePermSystem, D) -> tuple[Fraction, bool]:
    """(1/|S|) sum_{n in S} mu(D & T^n D), and whether it reaches mu(D)^2."""
    S = list(S)
    if not S:
        raise ValueError("S must be nonempty")
    table = _CorrelationTable(sys, D)
    avg = sum(table(n) for n in S) / len(S)
    return avg, avg >= measure(sys, D) ** 2


def default_battery(seed: int = 0, orders=range(2, 13), products=((2, 3), (3, 4), (4, 5)),
                    random_sets: bool = True) -> Battery:
    """Cyclic rotations of the given orders with Rohlin sets (and seeded random
    sets), plus products of coprime rotations with their Rohlin sets."""
    rng = random.Random(seed)
    bat = Battery()
    for N in orders:
        sys_ = FinitePermSystem.cyclic(N)
        R = rohlin_split(sys_, Fraction(1, N))
        bat.append(BatteryInstance(sys_, R.points, R.measure, f"cyclic{N}/rohlin"))
        if random_sets:
            D = frozenset(x for x in range(N) if rng.random() < 0.5) or frozenset({rng.randrange(N)})
            bat.append(BatteryInstance(sys_, D, Fraction(len(D), N), f"cyclic{N}/random"))
    for p, q in products:
        sys_ = product(FinitePermSystem.cyclic(p), FinitePermSystem.cyclic(q))
        R = rohlin_split(sys_, Fraction(1, sys_.size))
        bat.append(BatteryInstance(sys_, R.points, R.measure, f"cyclic{p}x{q}/rohlin"))
    return bat
