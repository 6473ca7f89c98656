import cmath
import itertools
import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from rigidrec.concentration import (
    BallSpec,
    RootsVector,
    SubsetOfGroup,
    avoidance_bound_check,
    ball,
    bridge_identity,
    d0,
    difference_set_mask,
    distance,
    exhaustive_audit,
    l1_bridge,
    bridge_function,
    min_r_for,
    nudge_radius,
    product_growth,
    product_set_mask,
    sampled_audit,
)
from rigidrec.kronecker import equal_partition
from rigidrec.torus import AtomicMeasure


def root(e, k):
    return cmath.exp(2j * math.pi * e / k)


def oracle_distance(x, y, k):
    # half euclidean distance from complex roots, summed over coordinates
    return sum(abs(root(a, k) - root(b, k)) / 2 for a, b in zip(x, y))


def elements(k, r):
    return [RootsVector.from_index(k, r, i) for i in range(k ** r)]


def test_d0_examples():
    assert d0(0, 1, 2) == 1
    assert d0(3, 3, 7) == 0
    assert abs(d0(0, 1, 4) - math.sqrt(2) / 2) < 1e-12
    with pytest.raises(ValueError):
        d0(0, 4, 4)


def test_distance_examples():
    x = RootsVector(2, (0, 0, 0, 0))
    assert distance(x, x) == 0
    assert distance(x, RootsVector(2, (1, 1, 0, 0))) == 2
    assert abs(distance(RootsVector(4, (0, 0)), RootsVector(4, (1, 2))) - (math.sqrt(2) / 2 + 1)) < 1e-12
    with pytest.raises(ValueError):
        distance(RootsVector(2, (0,)), RootsVector(3, (0,)))


@pytest.mark.parametrize("k,r", [(3, 2), (4, 2), (5, 2), (2, 4)])
def test_metric_is_translation_invariant_and_matches_oracle(k, r):
    els = elements(k, r)
    for x, y in itertools.product(els, els):
        d = distance(x, y)
        assert abs(d - oracle_distance(x.exps, y.exps, k)) < 1e-12
        for z in els[:: max(1, len(els) // 5)]:
            assert abs(distance(x * z, y * z) - d) < 1e-12


def test_ball_examples():
    c = RootsVector.identity(2, 4)
    assert len(ball(BallSpec(c, 0))) == 1
    assert len(ball(BallSpec(c, 1))) == 5
    assert len(ball(BallSpec(c, 4))) == 16


@given(st.integers(1, 8), st.floats(0, 8))
def test_k2_ball_sizes_are_binomial_sums(r, t):
    got = len(ball(BallSpec(RootsVector.identity(2, r), t)))
    assert got == sum(math.comb(r, i) for i in range(0, min(r, math.floor(t + 1e-12)) + 1))


def test_product_growth_examples():
    whole = SubsetOfGroup.whole(2, 3)
    assert product_growth(whole, 1.0).size == 8
    rec = product_growth(SubsetOfGroup.from_members(2, 2, [0]), 1.0)
    assert rec.size == 3 and abs(rec.bound - (1 - 4 * math.exp(-0.25))) < 1e-12 and rec.passed
    U1 = ball(BallSpec(RootsVector.identity(2, 4), 1))
    rec = product_growth(U1, 1.0)
    assert rec.size == 11 and abs(rec.bound - (1 - 16 / 5 * math.exp(-1 / 8))) < 1e-12
    with pytest.raises(ValueError):
        product_growth(SubsetOfGroup(2, 2, 0), 1.0)


@settings(max_examples=40, deadline=None)
@given(st.integers(2, 4), st.integers(1, 3), st.data())
def test_product_and_difference_sets_match_brute_force(k, r, data):
    n = k ** r
    A = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    B = data.draw(st.sets(st.integers(0, n - 1), min_size=1))
    sa, sb = SubsetOfGroup.from_members(k, r, A), SubsetOfGroup.from_members(k, r, B)
    els = elements(k, r)
    prod = {(els[a] * els[b]).index for a in A for b in B}
    diff = {(els[a].inverse() * els[b]).index for a in A for b in A}
    assert set(product_set_mask(sa, sb).nonzero()[0].tolist()) == prod
    assert set(difference_set_mask(sa).nonzero()[0].tolist()) == diff


def test_avoidance_examples():
    A = SubsetOfGroup.from_members(2, 4, [i for i in range(16) if i % 2 == 0])
    rec = avoidance_bound_check(A, RootsVector(2, (1, 0, 0, 0)), 0.5)
    assert rec.disjoint and rec.alpha == F(1, 2) and rec.passed
    assert abs(rec.bound - math.exp(-1 / 64)) < 1e-12
    rec = avoidance_bound_check(SubsetOfGroup.whole(2, 4), RootsVector.identity(2, 4), 0.5)
    assert rec.vacuous and rec.passed


@pytest.mark.parametrize("delta,eps,N", [(0.5, 1, 3), (math.exp(-1), 2, 2), (0.9, 100, 1)])
def test_min_r_for_examples(delta, eps, N):
    assert min_r_for(delta, eps) == N


@given(st.floats(0.01, 0.99), st.floats(0.05, 5))
def test_min_r_for_is_smallest(delta, eps):
    N = min_r_for(delta, eps)
    assert math.exp(-eps ** 2 * N / 4) < delta
    assert N == 1 or not math.exp(-eps ** 2 * (N - 1) / 4) < delta


def test_min_r_for_rejects_bad_input():
    for args in [(0, 1), (1, 1), (0.5, 0)]:
        with pytest.raises(ValueError):
            min_r_for(*args)


def test_nudge_moves_tie_radii_only():
    assert nudge_radius(1.0, 2, 4) == pytest.approx(1.0 - 1e-9, abs=1e-15)
    assert nudge_radius(1.5, 2, 4) == 1.5


def test_bridge_examples():
    sigma = AtomicMeasure.uniform([F(0), F(1, 2)])
    P = equal_partition(sigma, 2)
    lhs, rhs = bridge_identity(sigma, P, [0, 0], [0, 1], 2)
    assert abs(lhs - 1) < 1e-12 and abs(rhs - 1) < 1e-12
    sigma = AtomicMeasure.uniform([F(j, 4) for j in range(4)])
    P = equal_partition(sigma, 4)
    lhs, rhs = bridge_identity(sigma, P, [0, 0, 0, 0], [1, 1, 0, 0], 4)
    assert abs(lhs - math.sqrt(2) / 2) < 1e-12 and abs(rhs - math.sqrt(2) / 2) < 1e-12
    lhs, rhs = bridge_identity(sigma, P, [3, 1, 2, 0], [3, 1, 2, 0], 4)
    assert lhs == 0 and rhs == 0


@given(st.integers(2, 8), st.integers(1, 16), st.integers(1, 3), st.data())
@settings(max_examples=60, deadline=None)
def test_bridge_round_trip(k, r, per_cell, data):
    sigma = AtomicMeasure.uniform([F(j, r * per_cell) for j in range(r * per_cell)])
    P = equal_partition(sigma, r)
    psi = data.draw(st.lists(st.integers(0, k - 1), min_size=r, max_size=r))
    assert l1_bridge(bridge_function(sigma, P, psi, k), P, k).exps == tuple(psi)


def test_bridge_rejects_non_measurable():
    sigma = AtomicMeasure.uniform([F(0), F(1, 4), F(1, 2), F(3, 4)])
    P = equal_partition(sigma, 2)
    from rigidrec.torus import StepFunction
    with pytest.raises(ValueError):
        l1_bridge(StepFunction(sigma, [0, F(1, 2), 0, 0]), P, 2)


def brute_audit(k, r, subsets, radii, centers):
    els = elements(k, r)
    n = len(els)
    violations = 0
    for A in subsets:
        alpha = len(A) / n
        for t in radii:
            U0 = [y for y in els if oracle_distance(y.exps, (0,) * r, k) <= t + 1e-12]
            prod = {(els[a] * u).index for a in A for u in U0}
            if len(prod) / n < 1 - math.exp(-t * t / (2 * r)) / alpha - 1e-12:
                violations += 1
            diff = {(els[a].inverse() * els[b]).index for a in A for b in A}
            for c in centers:
                Ux = {y.index for y in els if oracle_distance(y.exps, els[c].exps, k) <= t + 1e-12}
                if not diff & Ux and alpha > math.exp(-t * t / (4 * r)) + 1e-12:
                    violations += 1
    return violations


def test_exhaustive_audit_small_matches_brute_force():
    rep = exhaustive_audit(2, 3, radii=(0.5, 1.5, 2.5), centers=[0, 1])
    subsets = [[i for i in range(8) if mask >> i & 1] for mask in range(1, 256)]
    assert rep.subsets_checked == 255
    assert rep.violations == brute_audit(2, 3, subsets, (0.5, 1.5, 2.5), [0, 1]) == 0


def test_audit_nudges_tie_radius():
    # radius 1 on k=2 sits on the tie lattice; the audit nudges it below
    rep = exhaustive_audit(2, 2, radii=(1.0,))
    assert rep.t[0] < 1.0
    assert rep.violations == 0


def test_audit_reports_witnesses_when_bound_is_broken(monkeypatch):
    import rigidrec.concentration as conc
    monkeypatch.setattr(conc, "avoidance_bound", lambda t, r: 0.0)
    rep = conc.exhaustive_audit(2, 3, radii=(0.5,))
    assert rep.violations > 0
    w = rep.witnesses[0]
    A = SubsetOfGroup(2, 3, w["A"])
    assert w["check"] == "avoidance"
    assert avoidance_bound_check(A, RootsVector.from_index(2, 3, w["x"]), w["t"]).disjoint


def test_sampled_audit_k3_r5():
    rep = sampled_audit(3, 5, samples=300, seed=1)
    assert rep.subsets_checked == 300 and rep.violations == 0
    assert sampled_audit(3, 5, samples=300, seed=1).to_json() == rep.to_json()


def test_sampled_audit_matches_brute_force_on_small_group():
    rng = random.Random(5)
    subsets = [rng.sample(range(9), rng.randint(1, 9)) for _ in range(30)]
    assert brute_audit(3, 2, subsets, (0.5, 1.5), [0, 1]) == 0
    assert sampled_audit(3, 2, samples=30, seed=5, radii=(0.5, 1.5)).violations == 0
