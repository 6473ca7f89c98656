"""Rigidity sets from character scans, and the diagonal set built from them.

For a measure sigma and unimodular step function f the scan
``n -> ||e_n - f||_{L^1(sigma)}`` is evaluated over a symmetric window.
Thresholding it gives S_eps (f = 1) and Q_{eps,f}.  A decreasing list of
thresholds gives a descending chain S_1 > S_2 > ...; `diagonalize` picks a
finite piece of each stage whose translates pass the battery certificate
and strings the pieces together.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Sequence

import mpmath
import numpy as np

from .intsets import BohrProxy, WindowSet, bohr_hit_test, weyl_sum
from .kronecker import KroneckerFamily
from .systems import (
    BatteryInstance,
    delta_recurrence_certify,
    optimal_recurrence_average,
    recurrence_witness,
    strong_recurrence_profile,
)
from .torus import (
    GUARD_BAND,
    PREC_BITS,
    AtomicMeasure,
    StepFunction,
    l1_char_distance,
    l1_scan,
    threshold_members,
    to_mpf,
)

MAX_WINDOW = 10**7
EMPIRICAL = "empirical, window-limited"


def _window(window) -> tuple[int, int]:
    if isinstance(window, int):
        lo, hi = -window, window
    else:
        lo, hi = (int(v) for v in window)
    if hi < lo:
        raise ValueError("empty window")
    if hi - lo + 1 > 2 * MAX_WINDOW + 1:
        raise OverflowError(f"window longer than the cap 2*{MAX_WINDOW}+1")
    return lo, hi


def _positive(eps):
    if isinstance(eps, float):
        if not eps > 0:
            raise ValueError("eps must be positive")
        return eps
    eps = Fraction(eps)
    if eps <= 0:
        raise ValueError("eps must be positive")
    return eps


@dataclass
class ScanResult:
    set: WindowSet
    boundary: list                 # n whose value fell in the guard band
    values: np.ndarray = field(repr=False)
    witness: int | None = None     # m with ||f - e_m|| < eps/2, if one is in the window
    witness_error: mpmath.mpf | None = None

    @property
    def lo(self) -> int:
        return self.set.lo


def _scan(sigma: AtomicMeasure, f: StepFunction, eps, window, guard: float,
          values: np.ndarray | None = None) -> ScanResult:
    eps = _positive(eps)
    lo, hi = _window(window)
    if values is None:
        values = l1_scan(sigma, f, lo, hi)
    mask, boundary = threshold_members(sigma, f, lo, eps, values, guard)
    res = ScanResult(WindowSet(lo, mask), boundary, values)
    # Q contains {n : ||e_n - e_m|| < eps/2} as soon as ||f - e_m|| < eps/2
    near = np.nonzero(values <= values.min() + guard)[0]
    exact = sorted((l1_char_distance(sigma, lo + int(i), f), abs(lo + int(i)), lo + int(i)) for i in near[:64])
    err, _, n = exact[0]
    with mpmath.workprec(PREC_BITS):
        if err < to_mpf(eps) / 2:
            res.witness, res.witness_error = n, err
    return res


def compute_S_eps(sigma: AtomicMeasure, eps, window, guard: float = GUARD_BAND) -> ScanResult:
    """S_eps = {n in window : ||e_n - 1||_{L^1(sigma)} < eps}."""
    return _scan(sigma, StepFunction.constant(sigma), eps, window, guard)


def compute_Q(sigma: AtomicMeasure, f: StepFunction, eps, window, guard: float = GUARD_BAND) -> ScanResult:
    """Q_{eps,f} = {n in window : ||e_n - f||_{L^1(sigma)} < eps}, with a reduction witness."""
    return _scan(sigma, f, eps, window, guard)


# -- diagonal construction --------------------------------------------------

@dataclass
class ChainSpec:
    family: KroneckerFamily
    thresholds: tuple = ()
    window: int = 10**4
    stages: int = 4

    def __post_init__(self):
        if not self.thresholds:
            self.thresholds = tuple(Fraction(1, j) for j in range(1, self.stages + 1))
        self.thresholds = tuple(_positive(e) for e in self.thresholds)
        self.stages = len(self.thresholds)
        if any(b >= a for a, b in zip(self.thresholds, self.thresholds[1:])):
            raise ValueError("thresholds must be strictly decreasing")
        if not isinstance(self.window, int) or self.window < 0:
            raise ValueError("window is the half-width W of [-W, W]")
        _window(self.window)

    @property
    def sigma(self) -> AtomicMeasure:
        return self.family.mixture

    @property
    def target(self) -> StepFunction:
        return self.family.target


@dataclass
class StageRecord:
    j: int
    eps: object
    delta: Fraction
    scanned: int                   # |S_j| inside the window
    piece: list
    boundary: list
    certificates: dict             # m -> Certificate for S_j' + m
    failure: str | None = None

    @property
    def passed(self) -> bool:
        return self.failure is None and all(c.passed for c in self.certificates.values())


@dataclass
class DiagonalResult:
    window: tuple
    stages: list
    battery_digest: str
    continuity_defect: Fraction

    @property
    def enumeration(self) -> list[int]:
        """Stage-major, then by |n|, negative first."""
        return [n for st in self.stages for n in st.piece]

    @property
    def stage_of(self) -> dict:
        return {n: st.j for st in self.stages for n in st.piece}

    @property
    def S(self) -> WindowSet:
        return WindowSet.from_members(self.enumeration, *self.window)

    @property
    def passed(self) -> bool:
        return all(st.passed for st in self.stages)

    def to_json(self) -> dict:
        return {
            "window": list(self.window),
            "battery": self.battery_digest,
            "continuity_defect": str(self.continuity_defect),
            "enumeration": self.enumeration,
            "stages": [{
                "j": st.j, "eps": str(st.eps), "delta": str(st.delta), "scanned": st.scanned,
                "piece": st.piece, "boundary": st.boundary, "failure": st.failure,
                "certificates": {str(m): c.to_json() for m, c in sorted(st.certificates.items())},
            } for st in self.stages],
        }


def _order(members) -> list[int]:
    return sorted(members, key=lambda n: (abs(n), n))


def diagonalize(chain: ChainSpec, battery: Sequence[BatteryInstance], min_piece: int = 8,
                guard: float = GUARD_BAND, values: np.ndarray | None = None) -> DiagonalResult:
    """Finite pieces S_j' of S_j whose translates S_j' + m, |m| <= j, are 1/j-recurrent.

    Each piece is the shortest run of not-yet-used members of S_j (in |n|
    order) that gives every eligible battery instance a witness for every
    translate, padded to `min_piece` elements.  Excluding earlier pieces
    keeps the enumeration free of repeats, so stage j contributes only
    members admitted at threshold eps_j.
    """
    lo, hi = _window(chain.window)
    sigma, f = chain.sigma, chain.target
    if values is None:
        values = l1_scan(sigma, f, lo, hi)
    used: set[int] = set()
    stages = []
    for j, eps in enumerate(chain.thresholds, start=1):
        delta = Fraction(1, j)
        scan = _scan(sigma, f, eps, (lo, hi), guard, values)
        cand = [n for n in _order(scan.set.members()) if n not in used]
        pending = {(m, i) for m in range(-j, j + 1)
                   for i, inst in enumerate(battery) if inst.measure > delta}
        piece = []
        for n in cand:
            if not pending and len(piece) >= min_piece:
                break
            piece.append(n)
            pending = {(m, i) for m, i in pending if not battery[i].recurs_at(n + m)}
        failure = None
        if pending:
            m, i = min(pending)
            failure = f"no member of S_{j} in the window recurs for translate {m} on instance {i}"
        certs = {m: delta_recurrence_certify([n + m for n in piece], battery, delta)
                 for m in range(-j, j + 1)}
        used.update(piece)
        stages.append(StageRecord(j, eps, delta, len(scan.set), _order(piece),
                                  scan.boundary, certs, failure))
    digest = battery.digest() if hasattr(battery, "digest") else ""
    return DiagonalResult((lo, hi), stages, digest, sigma.continuity_defect)


@dataclass
class RigidityReport:
    m: int
    weight: Fraction
    rows: list                 # (n, stage j, residual, bound eps_j / w_m)
    stage_tails: dict          # j -> max residual among members admitted at stage j

    @property
    def passed(self) -> bool:
        return all(r < b for _, _, r, b in self.rows)

    def violations(self) -> list:
        return [(n, j) for n, j, r, b in self.rows if not r < b]


def verify_rigidity_per_translate(result: DiagonalResult, family: KroneckerFamily, m: int) -> RigidityReport:
    """Residuals ||e_s - e_m||_{L^1(sigma_m)} along the enumeration.

    A member admitted at stage j has ||e_s - f||_{L^1(sigma)} < eps_j and
    sigma carries sigma_m with weight w_m, so its residual on block m must
    stay below eps_j / w_m.
    """
    if abs(m) > family.M:
        raise ValueError(f"|m| must be at most M={family.M}")
    sigma_m = family.block_measures[m]
    w = family.block_weights[m]
    target = StepFunction.character(sigma_m, m)
    eps = {st.j: st.eps for st in result.stages}
    rows, tails = [], {}
    with mpmath.workprec(PREC_BITS):
        for st in result.stages:
            for n in st.piece:
                r = l1_char_distance(sigma_m, n, target)
                bound = to_mpf(eps[st.j]) / to_mpf(w)
                rows.append((n, st.j, r, bound))
                tails[st.j] = max(tails.get(st.j, mpmath.mpf(0)), r)
    return RigidityReport(m, w, rows, tails)


# -- hierarchy classifier ---------------------------------------------------

@dataclass
class Flag:
    value: bool
    evidence: dict
    label: str = EMPIRICAL


def default_alpha_grid(max_q: int = 12) -> list:
    grid = sorted({Fraction(p, q) for q in range(2, max_q + 1) for p in range(1, q)})
    irrational = [math.sqrt(2) - 1, (math.sqrt(5) - 1) / 2, math.pi - 3, math.e - 2]
    return grid + [Fraction(a) for a in irrational]


def default_proxies() -> list[BohrProxy]:
    """Arcs of half-width 1/10 around points each frequency actually visits."""
    w = Fraction(1, 10)
    out = []
    for alpha, centres in ((Fraction(1, 2), (0, Fraction(1, 2))),
                           (Fraction(1, 3), (0, Fraction(1, 3), Fraction(2, 3))),
                           (Fraction(math.sqrt(2) - 1), (0, Fraction(1, 4), Fraction(1, 2), Fraction(3, 4))),
                           (Fraction((math.sqrt(5) - 1) / 2), (0, Fraction(1, 2)))):
        for c in centres:
            out.append(BohrProxy(((alpha, ((c - w) % 1, (c + w) % 1)),)))
    return out


def _members(S) -> list[int]:
    if isinstance(S, DiagonalResult):
        return S.enumeration
    if isinstance(S, WindowSet):
        return S.members()
    return list(S)


def hierarchy_classify(S, battery: Sequence[BatteryInstance], proxies: Sequence[BohrProxy] | None = None,
                       alpha_grid: Sequence | None = None, translates: Sequence[int] = (-1, 0, 1),
                       weyl_tolerance: float = 0.1) -> dict:
    """Finite-window evidence for the properties R1..R5.

    R1: Weyl sums of S below `weyl_tolerance` at every grid frequency.
    R2: averages of mu(D & T^n D) over S + m reach mu(D)^2, up to the
        truncation slack order(T)/|S| of a window that is not a whole number
        of periods.
    R3: the tail of mu(D & T^(s+m) D) along S stays above 0.
    R4: every translate recurs for every instance.
    R5: every translate meets every Bohr proxy.
    """
    seq = _members(S)
    if not seq:
        return {k: Flag(False, {"reason": "empty set"}) for k in ("R1", "R2", "R3", "R4", "R5")}
    grid = default_alpha_grid() if alpha_grid is None else [Fraction(a) for a in alpha_grid]
    proxies = default_proxies() if proxies is None else list(proxies)
    insts = [(i, inst) for i, inst in enumerate(battery) if inst.D]
    flags = {}

    sums = {str(a): weyl_sum(seq, a) for a in grid}
    prefixes = [len(seq) >> k for k in range(3, -1, -1) if len(seq) >> k]
    worst = max(sums, key=sums.get) if sums else None
    flags["R1"] = Flag(all(v < weyl_tolerance for v in sums.values()), {
        "largest": (worst, sums[worst]) if worst else None,
        "nested": {p: weyl_sum(seq[:p], Fraction(worst)) for p in prefixes} if worst else {},
        "tolerance": weyl_tolerance,
    })

    fails = []
    for m in translates:
        shifted = [n + m for n in seq]
        for i, inst in insts:
            avg, _ = optimal_recurrence_average(shifted, inst.system, inst.D)
            slack = Fraction(inst.system.order, len(seq))
            if avg < inst.measure ** 2 - slack:
                fails.append((m, i, str(avg), str(inst.measure ** 2)))
    flags["R2"] = Flag(not fails, {"counter": fails})

    fails = []
    for m in translates:
        for i, inst in insts:
            prof = strong_recurrence_profile(seq, inst.system, inst.D, m)
            if not prof.tail_sup > 0:
                fails.append((m, i))
    flags["R3"] = Flag(not fails, {"counter": fails})

    wit, fails = {}, []
    for m in translates:
        shifted = [n + m for n in seq]
        for i, inst in insts:
            n = recurrence_witness(shifted, inst.system, inst.D)
            if n is None:
                fails.append((m, i))
            else:
                wit[f"{m}:{i}"] = n
    flags["R4"] = Flag(not fails, {"witnesses": wit, "counter": fails})

    window = WindowSet.from_members(seq)
    hits, fails = {}, []
    for m in translates:
        for k, proxy in enumerate(proxies):
            ok, n = bohr_hit_test(window.translate(m), proxy)
            if ok:
                hits[f"{m}:{k}"] = n
            else:
                fails.append((m, k))
    flags["R5"] = Flag(not fails, {"hits": hits, "counter": fails})
    return flags
