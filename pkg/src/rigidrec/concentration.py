"""Hamming geometry on the group of r-tuples of k-th roots of unity.

An element is stored by its exponent vector ``(e_1, ..., e_r)`` with
coordinate ``exp(2 pi i e_j / k)``; its canonical index is the little-endian
mixed-radix number ``sum_j e_j k**j``.  The group law is coordinatewise
addition of exponents mod k.

The audits here check the product-set growth bound
``|A U_t(0)| / k**r >= 1 - exp(-t**2 / 2r) / alpha`` and its consequence that
``A^-1 A`` missing ``U_t(x)`` forces ``alpha <= exp(-t**2 / 4r)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Iterable, Sequence

import numpy as np

from .kronecker import EqualPartition
from .torus import AtomicMeasure, StepFunction, l1_step_distance

MAX_ELEMENTS = 1 << 24
MAX_EXHAUSTIVE_ELEMENTS = 20
TIE_TOL = 1e-12
BOUND_TOL = 1e-12
LATTICE_NUDGE = 1e-9


@dataclass(frozen=True)
class RootsVector:
    k: int
    exps: tuple[int, ...]

    def __post_init__(self):
        object.__setattr__(self, "exps", tuple(int(e) for e in self.exps))
        if self.k < 2:
            raise ValueError("k must be at least 2")
        if not self.exps:
            raise ValueError("r must be at least 1")
        if any(not (0 <= e < self.k) for e in self.exps):
            raise ValueError("exponents must lie in [0, k)")

    @property
    def r(self) -> int:
        return len(self.exps)

    @classmethod
    def identity(cls, k: int, r: int) -> "RootsVector":
        return cls(k, (0,) * r)

    @classmethod
    def from_index(cls, k: int, r: int, idx: int) -> "RootsVector":
        exps = []
        for _ in range(r):
            idx, e = divmod(idx, k)
            exps.append(e)
        return cls(k, tuple(exps))

    @property
    def index(self) -> int:
        return sum(e * self.k ** j for j, e in enumerate(self.exps))

    def __mul__(self, other: "RootsVector") -> "RootsVector":
        _same_shape(self, other)
        return RootsVector(self.k, tuple((a + b) % self.k for a, b in zip(self.exps, other.exps)))

    def inverse(self) -> "RootsVector":
        return RootsVector(self.k, tuple((-e) % self.k for e in self.exps))


def _same_shape(x: RootsVector, y: RootsVector):
    if x.k != y.k or x.r != y.r:
        raise ValueError(f"dimension mismatch: ({x.k},{x.r}) vs ({y.k},{y.r})")


@dataclass(frozen=True)
class BallSpec:
    center: RootsVector
    t: float

    def __post_init__(self):
        if self.t < 0:
            raise ValueError("radius must be nonnegative")


@dataclass(frozen=True)
class SubsetOfGroup:
    """Subset of the group, as a bitset over canonical indices."""

    k: int
    r: int
    bits: int

    def __post_init__(self):
        if self.bits < 0 or self.bits >> self.order:
            raise ValueError("bitset has members outside the group")

    @property
    def order(self) -> int:
        return self.k ** self.r

    @classmethod
    def from_members(cls, k: int, r: int, members: Iterable) -> "SubsetOfGroup":
        bits = 0
        for m in members:
            bits |= 1 << (m.index if isinstance(m, RootsVector) else int(m))
        return cls(k, r, bits)

    @classmethod
    def from_mask(cls, k: int, r: int, mask: np.ndarray) -> "SubsetOfGroup":
        return cls.from_members(k, r, np.nonzero(mask)[0].tolist())

    @classmethod
    def whole(cls, k: int, r: int) -> "SubsetOfGroup":
        return cls(k, r, (1 << k ** r) - 1)

    def members(self) -> list[int]:
        out, b, i = [], self.bits, 0
        while b:
            if b & 1:
                out.append(i)
            b >>= 1
            i += 1
        return out

    def mask(self) -> np.ndarray:
        m = np.zeros(self.order, dtype=bool)
        m[self.members()] = True
        return m

    def __len__(self) -> int:
        return bin(self.bits).count("1")

    def __contains__(self, x) -> bool:
        i = x.index if isinstance(x, RootsVector) else int(x)
        return bool(self.bits >> i & 1)

    @property
    def density(self) -> Fraction:
        return Fraction(len(self), self.order)


def d0(a: int, b: int, k: int) -> float:
    """Half the euclidean distance between exp(2 pi i a/k) and exp(2 pi i b/k)."""
    if not (0 <= a < k and 0 <= b < k):
        raise ValueError("exponents must lie in [0, k)")
    delta = abs(a - b)
    delta = min(delta, k - delta)
    return math.sin(math.pi * delta / k)


def distance(x: RootsVector, y: RootsVector) -> float:
    _same_shape(x, y)
    return sum(d0(a, b, x.k) for a, b in zip(x.exps, y.exps))


class GroupTables:
    """Digit and distance tables for one (k, r); used by the vectorized audits."""

    def __init__(self, k: int, r: int):
        n = k ** r
        if n > MAX_ELEMENTS:
            raise OverflowError(f"k^r = {n} exceeds the enumeration guard {MAX_ELEMENTS}")
        self.k, self.r, self.n = k, r, n
        idx = np.arange(n, dtype=np.int64)
        self.powers = k ** np.arange(r, dtype=np.int64)
        self.digits = (idx[:, None] // self.powers[None, :]) % k
        delta = np.arange(k)
        self.d0_table = np.sin(np.pi * np.minimum(delta, k - delta) / k)

    def mul_index(self, g: int) -> np.ndarray:
        """Index of h*g for every h."""
        gd = (g // self.powers) % self.k
        return ((self.digits + gd) % self.k) @ self.powers

    def inv(self, g: int) -> int:
        gd = (g // self.powers) % self.k
        return int(((-gd) % self.k) @ self.powers)

    def dist_from(self, center: int) -> np.ndarray:
        cd = (center // self.powers) % self.k
        return self.d0_table[(self.digits - cd) % self.k].sum(axis=1)

    def ball_mask(self, center: int, t: float) -> np.ndarray:
        return self.dist_from(center) <= t + TIE_TOL


_TABLES: dict = {}


def tables(k: int, r: int) -> GroupTables:
    if (k, r) not in _TABLES:
        _TABLES[(k, r)] = GroupTables(k, r)
    return _TABLES[(k, r)]


def ball(spec: BallSpec) -> SubsetOfGroup:
    """Closed Hamming ball U_t(x) = {y : d(x, y) <= t}."""
    c = spec.center
    tb = tables(c.k, c.r)
    return SubsetOfGroup.from_mask(c.k, c.r, tb.ball_mask(c.index, spec.t))


def product_set_mask(A: SubsetOfGroup, B: SubsetOfGroup) -> np.ndarray:
    tb = tables(A.k, A.r)
    a = A.mask()
    out = np.zeros(tb.n, dtype=bool)
    for u in B.members():
        out[tb.mul_index(u)[a]] = True
    return out


def difference_set_mask(A: SubsetOfGroup) -> np.ndarray:
    """A^-1 A by the direct double loop over members."""
    if len(A) ** 2 > 1 << 32:
        raise OverflowError("|A|^2 exceeds 2^32")
    tb = tables(A.k, A.r)
    a = A.mask()
    out = np.zeros(tb.n, dtype=bool)
    for g in A.members():
        out[tb.mul_index(tb.inv(g))[a]] = True
    return out


def growth_bound(alpha: float, t: float, r: int) -> float:
    return 1.0 - math.exp(-t * t / (2 * r)) / alpha


def avoidance_bound(t: float, r: int) -> float:
    return math.exp(-t * t / (4 * r))


@dataclass(frozen=True)
class GrowthRecord:
    size: int
    bound: float
    passed: bool


def product_growth(A: SubsetOfGroup, t: float) -> GrowthRecord:
    """Exact |A U_t(0)| together with the concentration lower bound."""
    if len(A) == 0:
        raise ValueError("A must be nonempty")
    U = ball(BallSpec(RootsVector.identity(A.k, A.r), t))
    size = int(product_set_mask(A, U).sum())
    bound = growth_bound(len(A) / A.order, t, A.r)
    return GrowthRecord(size, bound, size / A.order >= bound - BOUND_TOL)


@dataclass(frozen=True)
class AvoidanceRecord:
    disjoint: bool
    alpha: Fraction
    bound: float
    passed: bool

    @property
    def vacuous(self) -> bool:
        return not self.disjoint


def avoidance_bound_check(A: SubsetOfGroup, x: RootsVector, t: float) -> AvoidanceRecord:
    """If (A^-1 A) misses U_t(x), check |A|/k^r <= exp(-t^2/4r)."""
    alpha = A.density
    bound = avoidance_bound(t, A.r)
    if len(A) == 0:
        return AvoidanceRecord(True, alpha, bound, True)
    diff = difference_set_mask(A)
    U = tables(A.k, A.r).ball_mask(x.index, t)
    disjoint = not bool((diff & U).any())
    passed = (not disjoint) or float(alpha) <= bound + BOUND_TOL
    return AvoidanceRecord(disjoint, alpha, bound, passed)


def min_r_for(delta: float, eps: float) -> int:
    """Smallest N with exp(-eps^2 N / 4) < delta.

    The bound is independent of k.  For r >= N every A with density >= delta
    has (A^-1 A) meeting U_{r eps}(x) for every x.
    """
    if not (0 < delta < 1):
        raise ValueError("delta must lie in (0, 1)")
    if not eps > 0:
        raise ValueError("eps must be positive")
    N = max(1, math.floor(4 * math.log(1 / delta) / eps ** 2) + 1)
    while N > 1 and math.exp(-eps ** 2 * (N - 1) / 4) < delta:
        N -= 1
    while not math.exp(-eps ** 2 * N / 4) < delta:
        N += 1
    return N


def distance_lattice(k: int, r: int) -> list[float]:
    """All values the metric d can take on the group."""
    steps = [math.sin(math.pi * j / k) for j in range(1, k // 2 + 1)]
    vals = {0.0}
    for _ in range(r):
        vals |= {v + s for v in vals for s in steps}
    return sorted(vals)


def nudge_radius(t: float, k: int, r: int) -> float:
    """Move t down by 1e-9 when it sits within 1e-9 of an attainable distance."""
    for v in distance_lattice(k, r):
        if abs(t - v) < LATTICE_NUDGE:
            return v - LATTICE_NUDGE
    return t


# -- isometry between P-measurable Lambda_k-valued functions and Lambda_k^r --

def bridge_function(sigma: AtomicMeasure, P: EqualPartition, psi: Sequence[int], k: int) -> StepFunction:
    """Step function taking the value exp(2 pi i psi[j]/k) on cell j of P."""
    if P.measure is not sigma and P.measure != sigma:
        raise ValueError("partition belongs to a different measure")
    if len(psi) != P.r:
        raise ValueError("psi must assign one root to every cell")
    roots = [Fraction(e % k, k) for e in psi]
    return StepFunction(sigma, tuple(roots[j] for j in P.cell_of()))


def l1_bridge(f: StepFunction, P: EqualPartition, k: int) -> RootsVector:
    """Read a P-measurable Lambda_k-valued step function as an element of Lambda_k^r."""
    if f.measure is not P.measure and f.measure != P.measure:
        raise ValueError("partition belongs to a different measure")
    exps = []
    for cell in P.cells:
        vals = {f.turns[i] for i in cell}
        if len(vals) != 1:
            raise ValueError("function is not constant on a partition cell")
        t = vals.pop()
        if k % t.denominator:
            raise ValueError("function value is not a k-th root of unity")
        exps.append(t.numerator * (k // t.denominator))
    return RootsVector(k, tuple(exps))


def bridge_identity(sigma: AtomicMeasure, P: EqualPartition, psi1, psi2, k: int):
    """(L^1 distance, (2/r) * Hamming distance) for two cellwise root assignments."""
    f1 = bridge_function(sigma, P, psi1, k)
    f2 = bridge_function(sigma, P, psi2, k)
    lhs = l1_step_distance(f1, f2)
    rhs = 2.0 / P.r * distance(l1_bridge(f1, P, k), l1_bridge(f2, P, k))
    return lhs, rhs


# -- audits -----------------------------------------------------------------

@dataclass
class AuditReport:
    k: int
    r: int
    t: list
    centers: list
    subsets_checked: int = 0
    violations: int = 0
    vacuous_avoidance: int = 0
    witnesses: list = field(default_factory=list)
    mode: str = "exhaustive"
    seed: int | None = None

    def to_json(self) -> dict:
        return {
            "k": self.k, "r": self.r, "t": list(self.t), "centers": self.centers,
            "mode": self.mode, "seed": self.seed,
            "subsets_checked": self.subsets_checked, "violations": self.violations,
            "vacuous_avoidance": self.vacuous_avoidance, "witnesses": self.witnesses,
        }


def _popcount(a: np.ndarray) -> np.ndarray:
    return np.bitwise_count(a).astype(np.int64)


def _translate_masks(masks: np.ndarray, perm: np.ndarray) -> np.ndarray:
    """Image of every bitmask under the element permutation h -> perm[h]."""
    out = np.zeros_like(masks)
    one = masks.dtype.type(1)
    for h, ph in enumerate(perm):
        out |= ((masks >> masks.dtype.type(h)) & one) << masks.dtype.type(int(ph))
    return out


def _audit_chunk(k, r, radii, centers, lo, hi, max_witnesses):
    tb = tables(k, r)
    n = tb.n
    masks = np.arange(lo, hi, dtype=np.uint64)
    alpha = _popcount(masks) / n
    perms = [tb.mul_index(g) for g in range(n)]
    shifted = [_translate_masks(masks, p) for p in perms]
    one = np.uint64(1)
    diff = np.zeros_like(masks)
    for g in range(n):
        sel = ((masks >> np.uint64(g)) & one).astype(bool)
        diff[sel] |= shifted[tb.inv(g)][sel]
    violations, vacuous, witnesses = 0, 0, []

    def note(kind, sel, t, x):
        nonlocal violations
        bad = np.nonzero(sel)[0]
        violations += len(bad)
        for i in bad[: max(0, max_witnesses - len(witnesses))]:
            witnesses.append({"check": kind, "A": int(masks[i]), "t": t, "x": x})

    for t in radii:
        ball0 = np.nonzero(tb.ball_mask(0, t))[0]
        grown = np.zeros_like(masks)
        for u in ball0:
            grown |= shifted[u]
        for x in centers:
            grown_x = _translate_masks(grown, perms[x]) if x else grown
            bound = 1.0 - math.exp(-t * t / (2 * r)) / alpha
            bad = _popcount(grown_x) / n < bound - BOUND_TOL
            note("growth", bad, t, x)
            ball_bits = 0
            for y in np.nonzero(tb.ball_mask(x, t))[0]:
                ball_bits |= 1 << int(y)
            disjoint = (diff & np.uint64(ball_bits)) == 0
            vacuous += int((~disjoint).sum())
            bad = disjoint & (alpha > avoidance_bound(t, r) + BOUND_TOL)
            note("avoidance", bad, t, x)
    return violations, vacuous, witnesses


def exhaustive_audit(k: int = 2, r: int = 4, radii=(0.5, 1.5, 2.5, 3.5), centers=None,
                     workers: int = 1, max_witnesses: int = 20) -> AuditReport:
    """Check both concentration bounds on every nonempty subset of Lambda_k^r.

    Subsets are bitmasks, processed as numpy vectors; the index space is cut
    into contiguous chunks so that workers > 1 can share it.
    """
    n = k ** r
    if n > MAX_EXHAUSTIVE_ELEMENTS:
        raise OverflowError(f"exhaustive audit needs k^r <= {MAX_EXHAUSTIVE_ELEMENTS}")
    if centers is None:
        centers = [0, 1]            # identity and a one-coordinate step
    radii = [nudge_radius(float(t), k, r) for t in radii]
    total = 1 << n
    chunk = 1 << 16
    bounds = [(max(1, lo), min(total, lo + chunk)) for lo in range(0, total, chunk)]
    rep = AuditReport(k, r, radii, [RootsVector.from_index(k, r, c).exps for c in centers])
    if workers > 1 and len(bounds) > 1:
        from concurrent.futures import ProcessPoolExecutor
        with ProcessPoolExecutor(workers) as pool:
            parts = list(pool.map(_audit_chunk, *zip(*[(k, r, radii, centers, lo, hi, max_witnesses)
                                                        for lo, hi in bounds])))
    else:
        parts = [_audit_chunk(k, r, radii, centers, lo, hi, max_witnesses) for lo, hi in bounds]
    for v, vac, w in parts:
        rep.violations += v
        rep.vacuous_avoidance += vac
        rep.witnesses.extend(w[: max(0, max_witnesses - len(rep.witnesses))])
    rep.subsets_checked = total - 1
    return rep


def sampled_audit(k: int, r: int, samples: int, seed: int, radii=(0.5, 1.5, 2.5, 3.5),
                  centers=None, max_witnesses: int = 20) -> AuditReport:
    """Same checks on `samples` random nonempty subsets (seeded)."""
    tb = tables(k, r)
    if centers is None:
        centers = [0, 1]
    radii = [nudge_radius(float(t), k, r) for t in radii]
    rng = np.random.default_rng(seed)
    rep = AuditReport(k, r, radii, [RootsVector.from_index(k, r, c).exps for c in centers],
                      mode="sample", seed=seed)
    # dilation tables: row g lists g * u^-1 for u in the ball
    inv_mul = {}
    for t in radii:
        ball0 = np.nonzero(tb.ball_mask(0, t))[0]
        inv_mul[t] = np.stack([tb.mul_index(tb.inv(int(u))) for u in ball0], axis=1)
    sub = np.stack([tb.mul_index(tb.inv(g)) for g in range(tb.n)])  # sub[g, h] = h g^-1
    for _ in range(samples):
        p = rng.uniform(0.02, 0.98)
        a = rng.random(tb.n) < p
        if not a.any():
            a[rng.integers(tb.n)] = True
        alpha = a.sum() / tb.n
        members = np.nonzero(a)[0]
        diff = np.zeros(tb.n, dtype=bool)
        diff[sub[np.ix_(members, members)].ravel()] = True
        rep.subsets_checked += 1
        for t in radii:
            grown = a[inv_mul[t]].any(axis=1)          # A U_t(0)
            for x in centers:
                size = int(grown.sum())                  # translation preserves size
                if size / tb.n < growth_bound(alpha, t, r) - BOUND_TOL:
                    rep.violations += 1
                    if len(rep.witnesses) < max_witnesses:
                        rep.witnesses.append({"check": "growth", "A": members.tolist(), "t": t, "x": x})
                disjoint = not (diff & tb.ball_mask(x, t)).any()
                if not disjoint:
                    rep.vacuous_avoidance += 1
                elif alpha > avoidance_bound(t, r) + BOUND_TOL:
                    rep.violations += 1
                    if len(rep.witnesses) < max_witnesses:
                        rep.witnesses.append({"check": "avoidance", "A": members.tolist(), "t": t, "x": x})
    return rep
