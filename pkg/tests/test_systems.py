import math
import random
from fractions import Fraction as F

import pytest
from hypothesis import given, settings, strategies as st

from rigidrec.intsets import PeriodicSet, WindowSet, density
from rigidrec.systems import (
    Battery,
    BatteryInstance,
    FinitePermSystem,
    avoidance_system,
    correlation,
    correspondence_forward,
    correspondence_reverse,
    default_battery,
    delta_recurrence_certify,
    ergodic_union_check,
    measure,
    optimal_recurrence_average,
    orbit_return_set,
    product,
    recurrence_witness,
    rohlin_split,
    shift_infinite_audit,
    strong_recurrence_profile,
)

C2 = FinitePermSystem.cyclic(2)


@st.composite
def systems_with_sets(draw, max_n=12):
    n = draw(st.integers(1, max_n))
    perm = draw(st.permutations(range(n)))
    D = draw(st.sets(st.integers(0, n - 1), min_size=1))
    return FinitePermSystem(perm), frozenset(D)


def brute_correlation(sys, D, n):
    # iterate the permutation (or its inverse) |n| times
    inv = [0] * sys.size
    for x, y in enumerate(sys.perm):
        inv[y] = x
    step = sys.perm if n >= 0 else inv
    hits = 0
    for x in D:
        y = x
        for _ in range(abs(n)):
            y = step[y]
        hits += y in D
    return F(hits, sys.size)


def test_system_validation():
    with pytest.raises(ValueError):
        FinitePermSystem([0, 0])
    with pytest.raises(ValueError):
        FinitePermSystem([])
    assert FinitePermSystem.from_json({"size": 4, "perm": [1, 2, 3, 0]}).is_cyclic
    with pytest.raises(ValueError):
        FinitePermSystem.from_json({"size": 3, "perm": [1, 2, 3, 0]})


def test_correlation_examples():
    assert correlation(C2, {0}, 4) == F(1, 2) and correlation(C2, {0}, 3) == 0
    s = FinitePermSystem([2, 0, 1, 4, 3])
    assert correlation(s, range(5), 17) == 1
    assert correlation(FinitePermSystem.cyclic(4), {0, 1}, 1) == F(1, 4)


@given(systems_with_sets(), st.integers(-30, 30))
def test_correlation_invariants(sd, n):
    sys, D = sd
    c = correlation(sys, D, n)
    assert c == brute_correlation(sys, D, n)
    assert c == correlation(sys, D, n % sys.order)
    assert c == correlation(sys, D, -n)
    assert correlation(sys, D, 0) == measure(sys, D)


def test_recurrence_witness_examples():
    s = FinitePermSystem([1, 2, 0])
    assert recurrence_witness([0], s, {1}) == 0
    assert recurrence_witness([1], C2, {0}) is None
    assert recurrence_witness([1, 2], C2, {0}) == 2
    assert recurrence_witness([-2, 2, 5], C2, {0}) == -2
    with pytest.raises(ValueError):
        recurrence_witness([0], C2, set())


def test_certify_examples():
    bat = default_battery()
    K = max(inst.system.size for inst in bat)
    cert = delta_recurrence_certify(range(K + 1), bat, 0)
    assert cert.passed and len(cert.witnesses) == len(bat)
    assert not delta_recurrence_certify([], bat, 0).passed
    odd = Battery([BatteryInstance(C2, {0}, F(2, 5))])
    cert = delta_recurrence_certify(range(-99, 100, 2), odd, F(2, 5))
    assert cert.counterexample == 0


def test_certify_skips_ineligible_instances():
    bat = Battery([BatteryInstance(C2, {0}, F(1, 2))])
    cert = delta_recurrence_certify([1], bat, F(1, 2))
    assert cert.passed and cert.skipped == [0]


def test_strong_recurrence_examples():
    N = 12
    s = FinitePermSystem.cyclic(N)
    D = rohlin_split(s, F(1, 5)).points
    mult = list(range(0, 1201, N))
    prof = strong_recurrence_profile(mult, s, D, 0)
    assert set(prof.values) == {measure(s, D)}
    prof = strong_recurrence_profile(mult, s, D, 1)
    assert set(prof.values) == {0} and prof.tail_sup == 0
    assert set(strong_recurrence_profile([3, 5, 8], s, range(N)).values) == {1}


@pytest.mark.parametrize("M,eps,size", [(10, F(1, 5), 5), (9, F(1, 5), 4), (2, 1, 1)])
def test_rohlin_examples(M, eps, size):
    D = rohlin_split(FinitePermSystem.cyclic(M), eps)
    assert len(D.points) == size
    assert D.measure >= (1 - F(eps)) / 2


def test_rohlin_errors():
    with pytest.raises(ValueError):
        rohlin_split(FinitePermSystem.cyclic(3), F(1, 10))
    with pytest.raises(ValueError):
        rohlin_split(product(C2, C2), F(1, 2))
    with pytest.raises(ValueError):
        rohlin_split(FinitePermSystem.trivial(), 1)


@given(st.integers(2, 200), st.integers(1, 100))
def test_rohlin_invariants(M, k):
    eps = F(k, 100)
    sys = FinitePermSystem.cyclic(M)
    try:
        D = rohlin_split(sys, eps)
    except ValueError:
        assert M % 2 == 1 and F(M - 1, 2 * M) < (1 - eps) / 2
        return
    assert not D.points & sys.image(D.points)
    assert D.measure >= (1 - eps) / 2


def test_orbit_return_examples():
    assert orbit_return_set(C2, {0}, 0) == PeriodicSet.of(2, [0])
    s = FinitePermSystem.cyclic(4)
    assert orbit_return_set(s, range(4), 2) == PeriodicSet.integers()
    assert orbit_return_set(s, {0, 1}, 0) == PeriodicSet.of(4, [0, 1])


def test_correspondence_examples():
    sys, D = correspondence_forward(PeriodicSet.of(2, [0]))
    assert sys == C2 and D == {0}
    sys, D = correspondence_forward(PeriodicSet.integers())
    assert sys.size == 1 and D == {0}
    A = PeriodicSet.of(5, [0, 1])
    sys, D = correspondence_forward(A)
    assert density(A.intersect(A.shift(-1))) == F(1, 5) == correlation(sys, D, 1)
    assert correspondence_reverse(C2, {0}) == PeriodicSet.of(2, [0])
    assert correspondence_reverse(FinitePermSystem.cyclic(4), {0, 2}) == PeriodicSet.of(2, [0])
    assert correspondence_reverse(C2, {0, 1}) == PeriodicSet.integers()


@settings(max_examples=60, deadline=None)
@given(systems_with_sets(10))
def test_correspondence_reverse_any_system(sd):
    sys, D = sd
    A = correspondence_reverse(sys, D)
    assert density(A) >= measure(sys, D)


def test_product_examples():
    assert product(C2, FinitePermSystem.cyclic(3)).is_cyclic
    assert product(C2, C2).cycle_type() == [2, 2]
    s = FinitePermSystem([2, 0, 1, 4, 3])
    assert product(s, FinitePermSystem.trivial()) == s


@given(st.integers(1, 12), st.integers(1, 12))
def test_coprime_products_are_cyclic(p, q):
    P = product(FinitePermSystem.cyclic(p), FinitePermSystem.cyclic(q))
    assert P.is_cyclic == (math.gcd(p, q) == 1)
    if P.is_cyclic:
        assert ergodic_union_check(range(P.size), P, {0})[1]


def test_ergodic_union_examples():
    s = FinitePermSystem.cyclic(7)
    assert ergodic_union_check(range(10), s, {3}) == (1, True)
    assert ergodic_union_check([0], s, {3}) == (F(1, 7), False)
    assert ergodic_union_check(range(-20, 21, 2), C2, {0}) == (F(1, 2), False)


def test_shift_infinite_examples():
    W = WindowSet.interval(-100, 100)
    assert shift_infinite_audit(W, PeriodicSet.of(2, [0]), 0).count == 101
    ev = WindowSet.from_members(range(-100, 101, 2))
    assert shift_infinite_audit(ev, PeriodicSet.of(2, [0]), 1).count == 0
    rep = shift_infinite_audit(WindowSet.interval(0, 99), PeriodicSet.of(5, [0, 1]), 0)
    assert rep.count == 60 and rep.growing


def test_avoidance_system():
    R, E = avoidance_system([3, 5, 9], 0)
    assert all(not E & R.image(E, m) for m in (3, 5, 9))
    with pytest.raises(ValueError):
        avoidance_system([0, 1], 0)


def test_optimal_average_examples():
    s = FinitePermSystem.cyclic(6)
    D = {0, 1, 3}
    assert optimal_recurrence_average(range(6), s, D) == (F(1, 4), True)
    assert optimal_recurrence_average([0], s, D) == (F(1, 2), True)
    assert optimal_recurrence_average([1], C2, {0}) == (0, False)


@given(systems_with_sets(12))
def test_full_period_average_is_mu_squared(sd):
    sys, D = sd
    avg, ok = optimal_recurrence_average(range(sys.order), sys, D)
    assert ok and avg == measure(sys, D) ** 2 or not sys.is_cyclic


def test_default_battery_is_deterministic():
    a, b = default_battery(0), default_battery(0)
    assert a.digest() == b.digest()
    assert Battery.from_json(a.to_json()).digest() == a.digest()
    assert default_battery(1).digest() != a.digest()
    labels = [inst.label for inst in a]
    assert "cyclic12/rohlin" in labels and "cyclic4x5/rohlin" in labels
    with pytest.raises(ValueError):
        Battery.from_json({"not": "a list"})


def test_battery_instance_checks_measure():
    with pytest.raises(ValueError):
        BatteryInstance(C2, {0}, F(3, 4))


def test_random_return_sets_match_correlation():
    rng = random.Random(3)
    for _ in range(20):
        N = rng.randint(1, 30)
        D = {x for x in range(N) if rng.random() < 0.5} or {0}
        A = orbit_return_set(FinitePermSystem.cyclic(N), D, 0)
        assert A == PeriodicSet.of(N, D)
