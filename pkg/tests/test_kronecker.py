import itertools
from fractions import Fraction as F

import mpmath
import pytest
from hypothesis import given, settings, strategies as st

from rigidrec.kronecker import (
    CertificationError,
    DigitStage,
    KroneckerFamily,
    best_character_scan,
    block_order,
    build_family,
    build_stage,
    certified_bound,
    constructive_approximant,
    equal_partition,
)
from rigidrec.torus import AtomicMeasure, StepFunction, character_eval, chord


def brute_sup(stage, turns, hi):
    sigma = stage.measure()
    return min(max(chord(character_eval(n, x) - t) for x, t in zip(sigma.points, turns))
               for n in range(hi))


@pytest.mark.parametrize("b,r,atoms", [(4, 1, [F(1, 4)]), (4, 2, [F(1, 16), F(1, 4)]), (10, 1, [F(1, 10)])])
def test_build_stage_examples(b, r, atoms):
    assert list(build_stage(b, r).atoms) == atoms


def test_build_stage_guards():
    with pytest.raises(ValueError):
        build_stage(3, 2)
    with pytest.raises(OverflowError):
        build_stage(16, 600)
    with pytest.raises(ValueError):
        DigitStage(4, 1, (F(1, 64),))


@given(st.integers(4, 20), st.integers(1, 6), st.integers(0, 10**6))
def test_perturbed_stage_invariants(b, r, seed):
    s = build_stage(b, r, seed)
    assert len(s.atoms) == r
    assert list(s.atoms) == sorted(set(s.atoms))
    assert all(abs(d) < F(1, b ** (r + 2)) for d in s.deltas)
    assert build_stage(b, r, seed) == s


def test_approximant_examples():
    s1 = build_stage(4, 1)
    sigma = s1.measure()
    ap = constructive_approximant(s1, StepFunction(sigma, [F(1, 4)]))
    assert (ap.n, ap.sup_error) == (1, 0)
    ap = constructive_approximant(s1, StepFunction.constant(sigma))
    assert (ap.n, ap.sup_error) == (0, 0)

    s2 = build_stage(4, 2)
    sigma = s2.measure()
    target = StepFunction(sigma, [F(1, 4), F(1, 2)])   # atoms 1/16, 1/4
    ap = constructive_approximant(s2, target)
    assert ap.n == 6 and ap.digits == (2, 1)
    assert ap.sup_error <= 2 * mpmath.sinpi(mpmath.mpf(1) / 4)
    assert abs(ap.sup_error - brute_sup(s2, target.turns, 16)) < 1e-12


def test_approximant_rejects_unquantized_target():
    s = build_stage(4, 1)
    with pytest.raises(ValueError):
        constructive_approximant(s, StepFunction(s.measure(), [F(1, 8)]))


def test_certification_failure_names_atom():
    # a stage whose atoms sit at 1/4 and 1/8 breaks the digit layout
    fake = DigitStage.__new__(DigitStage)
    object.__setattr__(fake, "b", 4)
    object.__setattr__(fake, "r", 2)
    object.__setattr__(fake, "offset", 0)
    object.__setattr__(fake, "label", "")
    object.__setattr__(fake, "deltas", (F(0), F(1, 16) - F(1, 128)))
    sigma = fake.measure()
    target = StepFunction(sigma, [F(1, 2), F(0)])
    with pytest.raises(CertificationError) as exc:
        constructive_approximant(fake, target)
    assert exc.value.atom_index is not None


@pytest.mark.parametrize("r", [1, 2])
def test_approximant_optimal_for_small_stages(r):
    stage = build_stage(4, r)
    sigma = stage.measure()
    for turns in itertools.product(range(4), repeat=r):
        f = StepFunction(sigma, [F(t, 4) for t in turns])
        ap = constructive_approximant(stage, f)
        _, err = best_character_scan(sigma, f, 0, 4 ** r - 1)
        assert abs(ap.l1_error - err) < 1e-12
        assert abs(ap.sup_error - brute_sup(stage, f.turns, 4 ** r)) < 1e-12


@settings(max_examples=40, deadline=None)
@given(st.integers(4, 16), st.integers(1, 8), st.integers(0, 2**32), st.data())
def test_certificate_on_perturbed_stages(b, r, seed, data):
    stage = build_stage(b, r, seed)
    sigma = stage.measure()
    turns = data.draw(st.lists(st.integers(0, b - 1), min_size=r, max_size=r))
    ap = constructive_approximant(stage, StepFunction(sigma, [F(t, b) for t in turns]))
    assert ap.sup_error < certified_bound(b, r) + mpmath.mpf("1e-9")
    assert 0 <= ap.n < b ** r


def test_scan_examples():
    assert best_character_scan(AtomicMeasure.dirac(0), StepFunction.constant(AtomicMeasure.dirac(0)), -5, 5) == (0, 0)
    d = AtomicMeasure.dirac(F(1, 2))
    assert best_character_scan(d, StepFunction(d, [F(1, 2)]), 0, 4) == (1, 0)
    half = AtomicMeasure.from_atoms([(0, F(1, 2)), (F(1, 2), F(1, 2))])
    assert best_character_scan(half, StepFunction.constant(half), 1, 3) == (2, 0)


def test_scan_tie_break():
    half = AtomicMeasure.from_atoms([(0, F(1, 2)), (F(1, 2), F(1, 2))])
    n, _ = best_character_scan(half, StepFunction.constant(half), -4, 4)
    assert n == 0
    n, _ = best_character_scan(half, StepFunction.constant(half), -3, 3)
    assert n == 0
    d = AtomicMeasure.dirac(F(1, 2))
    n, _ = best_character_scan(d, StepFunction(d, [F(1, 2)]), -3, 3)
    assert n == -1


def test_family_examples():
    fam = build_family(4, 2, 0)
    assert fam.mixture == fam.block_measures[0]
    assert set(fam.target.turns) == {0}
    fam = build_family(4, 1, 1)
    assert [fam.block_weights[m] for m in (-1, 0, 1)] == [F(1, 4), F(1, 2), F(1, 4)]
    for m in (-1, 0, 1):
        for i in fam.block_atom_indices(m):
            x = fam.mixture.points[i]
            assert fam.target.turns[i] == (m * x) % 1


@given(st.integers(4, 12), st.integers(1, 4), st.integers(0, 3), st.one_of(st.none(), st.integers(0, 99)))
@settings(max_examples=30, deadline=None)
def test_family_invariants(b, r, M, seed):
    fam = build_family(b, r, M, seed)
    seen = set()
    for m in range(-M, M + 1):
        atoms = set(fam.blocks[m].atoms)
        assert not atoms & seen
        seen |= atoms
        assert sum(fam.mixture.weights[i] for i in fam.block_atom_indices(m)) == fam.block_weights[m]
    assert sum(fam.mixture.weights) == 1
    assert len(fam.mixture) == (2 * M + 1) * r
    assert KroneckerFamily.from_json(fam.to_json()).mixture == fam.mixture


def test_family_json_consistency_check():
    data = build_family(4, 1, 1).to_json()
    data["target"][0]["turn"] = "1/3"
    with pytest.raises(ValueError):
        KroneckerFamily.from_json(data)


def test_block_order():
    assert block_order(2) == [0, -1, 1, -2, 2]


def test_equal_partition_examples():
    u = AtomicMeasure.uniform([F(j, 5) for j in range(4)])
    assert equal_partition(u, 2).cells == ((0, 1), (2, 3))
    assert equal_partition(u, 4).cells == ((0,), (1,), (2,), (3,))
    w = AtomicMeasure((F(0), F(1, 3), F(2, 3)), (F(1, 2), F(1, 4), F(1, 4)))
    assert equal_partition(w, 2).cells == ((0,), (1, 2))
    with pytest.raises(ValueError):
        equal_partition(u, 3)
