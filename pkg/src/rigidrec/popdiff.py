"""Popular differences in Z/NZ and translated difference sets inside them.

B - B is contained in E exactly when B is a clique in the Cayley graph on
Z/N whose edges join x, y with x - y and y - x both in E.  Maximum cliques
are found with a bitset branch-and-bound using a greedy colouring bound.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable

import numpy as np

MAX_POPULAR_N = 256
MAX_CLIQUE_N = 64


@dataclass(frozen=True)
class CyclicSubset:
    N: int
    members: frozenset

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be positive")
        members = frozenset(int(a) for a in self.members)
        if any(not (0 <= a < self.N) for a in members):
            raise ValueError("members must lie in [0, N)")
        object.__setattr__(self, "members", members)

    @classmethod
    def of(cls, N: int, members: Iterable[int]) -> "CyclicSubset":
        return cls(N, frozenset(int(a) % N for a in members))

    def __len__(self) -> int:
        return len(self.members)

    def __contains__(self, g: int) -> bool:
        return int(g) % self.N in self.members

    def __iter__(self):
        return iter(sorted(self.members))

    def shift(self, n: int) -> "CyclicSubset":
        """E + n."""
        return CyclicSubset.of(self.N, (a + n for a in self.members))

    def mask(self) -> int:
        return sum(1 << a for a in self.members)

    @property
    def density(self) -> Fraction:
        return Fraction(len(self), self.N)

    def to_json(self) -> dict:
        return {"N": self.N, "members": sorted(self.members)}

    @classmethod
    def from_json(cls, data: dict) -> "CyclicSubset":
        try:
            return cls.of(int(data["N"]), data["members"])
        except (KeyError, TypeError) as exc:
            raise ValueError(f"malformed cyclic subset JSON: {exc}") from exc


@dataclass(frozen=True)
class CliqueInstance:
    """Allowed differences E': symmetric and containing 0."""

    N: int
    allowed: frozenset

    def __post_init__(self):
        a = frozenset(int(g) % self.N for g in self.allowed)
        if 0 not in a:
            raise ValueError("allowed differences must contain 0")
        if any((-g) % self.N not in a for g in a):
            raise ValueError("allowed differences must be symmetric")
        object.__setattr__(self, "allowed", a)

    @classmethod
    def from_set(cls, E: CyclicSubset) -> "CliqueInstance | None":
        """Symmetric core E & -E, or None when 0 is not in E."""
        if 0 not in E:
            return None
        return cls(E.N, frozenset(g for g in E.members if (-g) % E.N in E))


def difference_counts(A: CyclicSubset) -> np.ndarray:
    """|A & (A - g)| for g = 0..N-1, via circular autocorrelation."""
    N = A.N
    ind = np.zeros(N, dtype=np.int64)
    ind[list(A.members)] = 1
    if N <= 64:
        return np.array([int(ind @ np.roll(ind, -g)) for g in range(N)], dtype=np.int64)
    spec = np.fft.rfft(ind)
    return np.rint(np.fft.irfft(spec.conj() * spec, n=N)).astype(np.int64)


def popular_set(A: CyclicSubset, c) -> CyclicSubset:
    """P_c(A) = {g : |A & (A - g)| > c N}, compared exactly."""
    c = Fraction(c)
    if c < 0:
        raise ValueError("c must be nonnegative")
    if A.N > MAX_POPULAR_N:
        raise OverflowError(f"N={A.N} above the guard {MAX_POPULAR_N}")
    cN = c * A.N
    counts = difference_counts(A)
    return CyclicSubset(A.N, frozenset(g for g in range(A.N) if counts[g] > cN))


# -- maximum clique ---------------------------------------------------------

def _popcount(x: int) -> int:
    return bin(x).count("1")


def _bits(x: int):
    while x:
        low = x & -x
        yield low.bit_length() - 1
        x ^= low


def _max_clique(adj: list[int], cand: int) -> list[int]:
    """Maximum clique among the vertices of bitmask `cand`."""
    best: list[int] = []

    def colour_order(P: int):
        # greedy sequential colouring; returns vertices with their colour bound
        order, bounds = [], []
        colour = 0
        uncol = P
        while uncol:
            colour += 1
            avail = uncol
            while avail:
                v = (avail & -avail).bit_length() - 1
                avail &= ~adj[v] & ~(1 << v)
                uncol &= ~(1 << v)
                order.append(v)
                bounds.append(colour)
        return order, bounds

    def expand(R: list[int], P: int):
        nonlocal best
        order, bounds = colour_order(P)
        for v, bound in zip(reversed(order), reversed(bounds)):
            if len(R) + bound <= len(best):
                return
            R.append(v)
            Q = P & adj[v]
            if Q:
                expand(R, Q)
            elif len(R) > len(best):
                best = list(R)
            R.pop()
            P &= ~(1 << v)

    expand([], cand)
    return best


def _canonical_translate(B: list[int], N: int) -> frozenset:
    """Lexicographically smallest translate (as a sorted tuple) of B."""
    return frozenset(min(tuple(sorted((b - t) % N for b in B)) for t in B))


def max_diffset_inside(E: CyclicSubset, N: int | None = None) -> tuple[int, frozenset]:
    """Largest |B| with B - B inside E, and a witness B (smallest translate)."""
    N = E.N if N is None else N
    if N != E.N:
        raise ValueError("E lives in a different group")
    if N > MAX_CLIQUE_N:
        raise OverflowError(f"N={N} above the clique guard {MAX_CLIQUE_N}")
    inst = CliqueInstance.from_set(E)
    if inst is None:
        return 0, frozenset()
    allowed = inst.allowed
    adj = [sum(1 << y for y in range(N) if y != x and (y - x) % N in allowed) for x in range(N)]
    # translation invariance: some maximum clique contains 0
    clique = [0] + _max_clique(adj, adj[0])
    return len(clique), _canonical_translate(clique, N)


@dataclass
class TranslateScan:
    found: bool
    n0: int | None
    B: frozenset | None
    sizes: list          # max |B| for E - n0, n0 = 0..N-1


def contains_translated_diffset(E: CyclicSubset, threshold: int) -> TranslateScan:
    """Is there n0 with n0 + B - B inside E and |B| >= threshold?"""
    sizes, hit = [], None
    for n0 in range(E.N):
        size, B = max_diffset_inside(E.shift(-n0))
        sizes.append(size)
        if hit is None and size >= threshold:
            hit = (n0, B)
    if hit is None:
        return TranslateScan(False, None, None, sizes)
    return TranslateScan(True, hit[0], hit[1], sizes)


# -- extremal search --------------------------------------------------------

@dataclass
class SearchAudit:
    N: int
    c: Fraction
    threshold: int
    popular: CyclicSubset
    scan: TranslateScan
    evaluations: int
    target_reached: bool
    note: str = "exploratory local search; the audit, not the density, is the result"

    def to_json(self) -> dict:
        return {"N": self.N, "c": str(self.c), "threshold": self.threshold,
                "popular": sorted(self.popular.members), "per_n0_max_clique": self.scan.sizes,
                "contains_translate": self.scan.found, "evaluations": self.evaluations,
                "target_reached": self.target_reached, "note": self.note}


@dataclass
class SearchResult:
    best: CyclicSubset
    audit: SearchAudit
    history: list = field(default_factory=list)


def extremal_search(N: int, target_density, c, budget: int, seed: int = 0) -> SearchResult:
    """Local search for a dense A whose P_c(A) holds no n0 + B - B with |B| > cN.

    Moves add a random element, or swap one out and one in.  A candidate is
    valid when `contains_translated_diffset(P_c(A), ceil(cN) + 1)` is false.
    The best valid candidate (largest, then lexicographically smallest) is
    returned with an exact audit.
    """
    if budget < 1:
        raise ValueError("budget must be at least 1")
    c = Fraction(c)
    target = Fraction(target_density)
    threshold = math.ceil(c * N) + 1
    rng = random.Random(seed)
    cache: dict[frozenset, bool] = {}
    evals = 0

    def valid(A: frozenset) -> bool:
        nonlocal evals
        P = popular_set(CyclicSubset(N, A), c)
        if P.members not in cache:
            evals += 1
            cache[P.members] = not contains_translated_diffset(P, threshold).found
        return cache[P.members]

    def better(A, B):
        return (len(A), tuple(-a for a in sorted(A))) > (len(B), tuple(-b for b in sorted(B)))

    cur = frozenset({0})
    if not valid(cur):
        cur = frozenset()
    best = cur
    history = [len(best)]
    for _ in range(budget - 1):
        if Fraction(len(best), N) >= target and len(best) == N:
            break
        outside = [x for x in range(N) if x not in cur]
        if outside and (not cur or rng.random() < 0.6):
            cand = cur | {rng.choice(outside)}
        elif cur and outside:
            cand = (cur - {rng.choice(sorted(cur))}) | {rng.choice(outside)}
        else:
            cand = cur - {rng.choice(sorted(cur))} if cur else cur
        if valid(cand) and len(cand) >= len(cur):
            cur = cand
            if better(cur, best):
                best = cur
                history.append(len(best))
        elif rng.random() < 0.02:
            cur = best
    bestA = CyclicSubset(N, best)
    P = popular_set(bestA, c)
    scan = contains_translated_diffset(P, threshold)
    assert not scan.found or not best
    audit = SearchAudit(N, c, threshold, P, scan, evals, bestA.density >= target)
    return SearchResult(bestA, audit, history)
