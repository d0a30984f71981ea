"""Metric oracles: hand-computed cases and estimator sanity bounds."""

import numpy as np
import pytest

from vlhmc import (
    MetricSeries,
    autocorrelation,
    ess,
    exact_sample,
    mmd2,
    mode_occupancy,
    rem_series,
)


class TestAutocorrelation:
    def test_lag_zero_is_exactly_one(self):
        rng = np.random.default_rng(80)
        series = autocorrelation(rng.standard_normal((500, 3)), 20)
        assert series.values[0] == 1.0

    def test_iid_draws_decorrelate(self):
        rng = np.random.default_rng(81)
        series = autocorrelation(rng.standard_normal(10**5), 50)
        assert np.all(np.abs(series.values[1:]) < 0.02)

    def test_period_two_chain(self):
        n = 1000
        x = np.tile([1.0, -1.0], n // 2)
        series = autocorrelation(x, 1)
        # the single-mean estimator gives -(n-1)/n at lag 1
        assert series.values[1] == pytest.approx(-1.0, abs=1.5 / n)

    def test_bounded_by_one(self):
        rng = np.random.default_rng(82)
        x = np.cumsum(rng.standard_normal((2000, 2)), axis=0)  # a very sticky chain
        series = autocorrelation(x, 100)
        assert np.all(np.abs(series.values) <= 1 + 1e-12)

    def test_zero_variance_rejected(self):
        with pytest.raises(ValueError, match="zero-variance"):
            autocorrelation(np.ones(100), 5)

    def test_needs_enough_samples(self):
        with pytest.raises(ValueError, match="at least"):
            autocorrelation(np.arange(5.0), 10)


class TestEss:
    def test_iid_near_nominal(self):
        rng = np.random.default_rng(83)
        n = 10**4
        x = rng.standard_normal(n)
        assert 0.8 * n <= ess(x) <= 1.2 * n

    def test_duplicated_chain_halves(self):
        rng = np.random.default_rng(84)
        n = 5000
        x = np.repeat(rng.standard_normal(n // 2), 2)
        assert ess(x) == pytest.approx(n / 2, rel=0.2)

    def test_never_exceeds_n_and_positive(self):
        rng = np.random.default_rng(85)
        for x in (
            rng.standard_normal(500),
            np.cumsum(rng.standard_normal(500)),
            np.repeat(rng.standard_normal(250), 2),
        ):
            value = ess(x)
            assert 0 < value <= len(x) * (1 + 1e-12)


class TestMmd:
    def test_identical_sets_are_zero(self):
        rng = np.random.default_rng(86)
        x = rng.standard_normal((200, 3))
        assert abs(mmd2(x, x)) <= 1e-12

    def test_hand_computed_two_points(self):
        # k(x,x)=4, k(y,y)=4, k(x,y)=1 -> 4 - 2 + 4 = 6
        assert mmd2([[1.0, 0.0]], [[0.0, 1.0]]) == pytest.approx(6.0, abs=1e-12)

    def test_separation(self):
        rng = np.random.default_rng(87)
        base1 = rng.standard_normal((10**4, 1))
        base2 = rng.standard_normal((10**4, 1))
        shifted = rng.standard_normal((10**4, 1)) + 5.0
        assert mmd2(base1, shifted) > 100 * abs(mmd2(base1, base2))

    def test_symmetry_and_nonnegativity(self):
        rng = np.random.default_rng(88)
        x = rng.standard_normal((300, 2))
        y = rng.standard_normal((300, 2)) + 0.3
        assert mmd2(x, y) == pytest.approx(mmd2(y, x), abs=1e-12)
        assert mmd2(x, y) >= -1e-12

    def test_dimension_mismatch(self):
        with pytest.raises(ValueError, match="dimension"):
            mmd2(np.zeros((5, 2)), np.zeros((5, 3)))

    def test_subsampling_bounds_cost_deterministically(self):
        rng = np.random.default_rng(89)
        x = rng.standard_normal((5000, 2))
        y = rng.standard_normal((5000, 2))
        assert mmd2(x, y, max_points=500) == mmd2(x, y, max_points=500)


class TestRem:
    def test_chain_at_truth_is_zero(self):
        x = np.tile([-0.4, -0.4], (100, 1))
        series = rem_series(x, [-0.4, -0.4])
        # cumulative-sum roundoff keeps this at the ulp scale, not literal 0
        assert np.all(series.values <= 1e-14)

    def test_single_zero_sample(self):
        series = rem_series(np.zeros((1, 2)), [-0.4, -0.4])
        assert series.values[0] == pytest.approx(1.0, abs=1e-15)

    def test_scale_invariance(self):
        rng = np.random.default_rng(90)
        x = rng.standard_normal((200, 3)) + 1.0
        truth = np.array([1.0, 1.0, 1.0])
        base = rem_series(x, truth)
        scaled = rem_series(7.5 * x, 7.5 * truth)
        np.testing.assert_allclose(scaled.values, base.values, atol=1e-12)

    def test_zero_denominator_rejected(self):
        with pytest.raises(ValueError, match="zero L1"):
            rem_series(np.zeros((10, 2)), [0.0, 0.0])


class TestModeOccupancy:
    def test_single_center(self):
        rng = np.random.default_rng(91)
        occ = mode_occupancy(rng.standard_normal((50, 2)), [[0.0, 0.0]])
        np.testing.assert_array_equal(occ, [1.0])

    def test_far_mode_exact_samples(self, far_mode_target):
        draws = exact_sample(far_mode_target, 10**5, np.random.default_rng(92))
        occ = mode_occupancy(draws, [[6.5, -6.5], [-6.5, 6.5]])
        np.testing.assert_allclose(occ, [0.5, 0.5], atol=0.01)
        assert occ.sum() == pytest.approx(1.0, abs=1e-12)

    def test_permutation_equivariance(self):
        rng = np.random.default_rng(93)
        x = rng.standard_normal((400, 2))
        centers = np.array([[2.0, 0.0], [-2.0, 0.0], [0.0, 2.0]])
        occ = mode_occupancy(x, centers)
        perm = [2, 0, 1]
        np.testing.assert_array_equal(mode_occupancy(x, centers[perm]), occ[perm])


class TestMetricSeries:
    def test_index_must_increase(self):
        with pytest.raises(ValueError, match="increasing"):
            MetricSeries("x", [3, 2, 1], [0.0, 0.0, 0.0])

    def test_values_must_be_finite(self):
        with pytest.raises(ValueError, match="finite"):
            MetricSeries("x", [1, 2], [0.0, float("inf")])
