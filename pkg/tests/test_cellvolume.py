import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from accessbound import bounds as bd
from accessbound import cellvolume as cv
from accessbound.geometry import Ball


def two_atoms():
    return cv.CellVolumeDistribution([0, 1], [math.log(0.5), math.log(0.25)], 0, 0)


def enumerate_median(values, weights, n):
    """Lower median of the n-fold sum by brute enumeration of outcome tuples."""
    import itertools

    outcomes = []
    for combo in itertools.product(range(len(values)), repeat=n):
        outcomes.append((sum(values[i] for i in combo), math.prod(weights[i] for i in combo)))
    outcomes.sort()
    acc = 0.0
    for v, w in outcomes:
        acc += w
        if acc >= 0.5 - 1e-12:
            return v


class TestEstimate:
    def test_dominant_row(self):
        F = np.array([[10.0, 10.0], [1.0, 1.0], [0.0, 0.0]])
        D = cv.estimate_cells(F, [1.0, 1.0], [2.0, 2.0], 5000, seed=0)
        assert D.tokens.tolist() == [0]
        assert D.log_fractions[0] == 0.0
        assert D.zero_mass_tokens == 2

    def test_symmetric_halves(self):
        F = np.array([[1.0, 0.0], [-1.0, 0.0]])
        N = 40_000
        D = cv.estimate_cells(F, [-1.0, -1.0], [1.0, 1.0], N, seed=1)
        f = np.exp(D.log_fractions)
        sigma = math.sqrt(0.25 / N)
        assert np.all(np.abs(f - 0.5) < 3 * sigma)

    def test_conservation(self):
        F = np.random.default_rng(0).normal(size=(7, 3))
        D = cv.estimate_cells(F, [-1] * 3, [1] * 3, 10_000, seed=2, shards=3)
        assert np.exp(D.log_fractions).sum() == pytest.approx(1.0, abs=1e-12)
        assert D.sample_count == 10_000

    def test_deterministic_by_seed_and_shards(self):
        F = np.random.default_rng(0).normal(size=(5, 3))
        a = cv.estimate_cells(F, [-1] * 3, [1] * 3, 3000, seed=7, shards=2)
        b = cv.estimate_cells(F, [-1] * 3, [1] * 3, 3000, seed=7, shards=2)
        assert np.array_equal(a.log_fractions, b.log_fractions)

    def test_ranked_nonincreasing(self):
        F = np.random.default_rng(1).normal(size=(20, 4))
        r = cv.estimate_cells(F, [-1] * 4, [1] * 4, 20_000, seed=0).ranked_fractions()
        assert np.all(np.diff(r) <= 0)


class TestMedian:
    def test_dirac_atom(self):
        D = cv.dirac(4)
        assert np.exp(D.log_fractions).tolist() == [0.25] * 4
        assert math.exp(cv.convolve_median(D, 3).log_median) == pytest.approx(4.0 ** -3)

    @pytest.mark.parametrize("n", [1, 5, 40])
    def test_dirac_any_n(self, n):
        assert cv.convolve_median(cv.dirac(7), n).log_median == pytest.approx(-n * math.log(7), rel=1e-14)

    def test_two_atom_example(self):
        assert math.exp(cv.convolve_median(two_atoms(), 2).log_median) == pytest.approx(1 / 8)

    @pytest.mark.parametrize("n", [1, 2, 3, 6])
    def test_exact_matches_enumeration(self, n):
        D = cv.from_counts([5, 3, 1, 1])
        vals, w = D.atoms()
        assert cv.convolve_median(D, n).log_median == pytest.approx(
            enumerate_median(vals.tolist(), w.tolist(), n), abs=1e-12)

    def test_mc_ci_covers_exact(self):
        r = cv.convolve_median(two_atoms(), 2, "mc", samples=100_000, seed=0)
        exact = math.log(1 / 8)
        assert r.ci_low <= exact <= r.ci_high

    def test_one_fold_is_median_of_d(self):
        D = cv.from_counts([8, 1, 1])
        vals, w = D.atoms()
        assert cv.convolve_median(D, 1).log_median == enumerate_median(vals.tolist(), w.tolist(), 1)

    def test_nonincreasing_in_n(self):
        D = cv.from_counts([50, 20, 10, 5, 1])
        meds = [cv.convolve_median(D, n).log_median for n in range(1, 9)]
        assert all(b <= a for a, b in zip(meds, meds[1:]))
        curve = cv.median_curve(D, range(1, 11), samples=20_000)
        assert all(b.log_median <= a.log_median for (_, a), (_, b) in zip(curve, curve[1:]))

    def test_exact_budget(self):
        with pytest.raises(ValueError):
            cv.convolve_median(cv.from_counts(list(range(1, 21))), 6)


class TestThreshold:
    @given(st.integers(1, 64), st.integers(1, 6), st.floats(0.1, 50.0), st.floats(1e-3, 0.5),
           st.integers(2, 10 ** 5))
    @settings(max_examples=20)
    def test_dirac_recovers_finite_bound(self, d, m, r, eps, V):
        geom = bd.ModelGeometry(d, V, Ball(d, r, "linf"), bd.UniformPrecision(eps), m)
        lp = bd.count_finite(geom)
        assert cv.inaccessibility_threshold(cv.dirac(V), lp) == math.ceil(bd.threshold_finite(geom))

    def test_uneven_cells_tighten(self):
        # token-uniform draws mostly hit the tiny cells, so the median falls faster than 1/|V|^n
        counts = [9900] + [1] * 100
        D = cv.from_counts(counts)
        lp = 30.0
        assert cv.inaccessibility_threshold(D, lp, samples=20_000) < \
            cv.inaccessibility_threshold(cv.dirac(len(counts)), lp)

    def test_tiny_packing(self):
        assert cv.inaccessibility_threshold(cv.dirac(10), 1e-12) == 1
        assert cv.inaccessibility_threshold(cv.from_counts([3, 2, 1]), 1e-12, samples=5000) == 1

    def test_exact_method_agrees(self):
        D = cv.from_counts([4, 2, 1, 1])
        a = cv.inaccessibility_threshold(D, 5.0, method="exact")
        n = a
        assert cv.convolve_median(D, n).log_median <= -5.0 < cv.convolve_median(D, n - 1).log_median

    def test_cap(self):
        D = cv.CellVolumeDistribution([0, 1], [0.0, 0.0], 0, 0)
        with pytest.raises(cv.ThresholdCapError):
            cv.inaccessibility_threshold(D, 3.0)

    def test_rejects_nonpositive(self):
        with pytest.raises(ValueError):
            cv.inaccessibility_threshold(cv.dirac(3), 0.0)
