"""Mixture diagnostic tests: ECDF distance, KDE resampling, Monte Carlo p-value."""

import numpy as np
import pytest

from quantify import (
    EstimationError,
    ScoredDataset,
    kde_fit,
    rng_from,
    shift_test,
    t_statistic,
)
from quantify.shift_test import ecdf_values


def scored(unlabeled, class0, class1) -> ScoredDataset:
    return ScoredDataset(unlabeled=np.asarray(unlabeled, dtype=float),
                         classes=(np.asarray(class0, dtype=float),
                                  np.asarray(class1, dtype=float)))


def oracle_t(g0, g1, gu, grid_size):
    """Brute-force double loop over the weight grid and all pooled points."""
    points = np.unique(np.concatenate([g0, g1, gu]))
    best_t, best_p = np.inf, None
    for p in np.linspace(0.0, 1.0, grid_size):
        worst = 0.0
        for w in points:
            f0 = np.mean(g0 <= w)
            f1 = np.mean(g1 <= w)
            fu = np.mean(gu <= w)
            worst = max(worst, abs(p * f1 + (1.0 - p) * f0 - fu))
        if worst < best_t:
            best_t, best_p = worst, p
    return best_t, best_p


class TestEcdfValues:
    def test_counting(self):
        sample = np.array([1.0, 2.0, 3.0])
        np.testing.assert_allclose(ecdf_values(sample, np.array([2.0])), [2.0 / 3.0])

    def test_boundaries(self):
        sample = np.array([1.0, 2.0, 3.0])
        points = np.array([0.5, 3.0, 9.0])
        np.testing.assert_allclose(ecdf_values(sample, points), [0.0, 1.0, 1.0])

    def test_ties(self):
        sample = np.array([1.0, 1.0, 2.0])
        np.testing.assert_allclose(ecdf_values(sample, np.array([1.0])), [2.0 / 3.0])

    def test_empty_sample(self):
        with pytest.raises(EstimationError, match="empty"):
            ecdf_values(np.empty(0), np.array([0.0]))


class TestTStatistic:
    """Best-mixture Kolmogorov distance on the pooled evaluation points."""

    def test_hand_case_with_the_minimizer_on_the_grid(self):
        """For {0,1} vs {2,3} vs {0,2} the distance max(p/2, |1/2-p|) bottoms
        out at p = 1/3 with value 1/6; a 4-point grid contains that weight."""
        rows = scored([0.0, 2.0], [0.0, 1.0], [2.0, 3.0])
        t, p_star = t_statistic(rows, grid_size=4)
        np.testing.assert_allclose(t, 1.0 / 6.0, atol=1e-12)
        np.testing.assert_allclose(p_star, 1.0 / 3.0, atol=1e-12)

    def test_unlabeled_copy_of_class1(self):
        rows = scored([2.0, 3.0], [0.0, 1.0], [2.0, 3.0])
        t, p_star = t_statistic(rows)
        assert t == 0.0
        assert p_star == 1.0

    def test_bounded_by_the_endpoint_distance(self):
        rng = rng_from(61)
        for _ in range(25):
            g0 = rng.normal(0.0, 1.0, rng.integers(3, 30))
            g1 = rng.normal(1.5, 1.0, rng.integers(3, 30))
            gu = rng.normal(rng.uniform(0, 2), 1.0, rng.integers(3, 40))
            rows = scored(gu, g0, g1)
            t, _ = t_statistic(rows)
            points = np.unique(np.concatenate([g0, g1, gu]))
            endpoint = np.max(np.abs(ecdf_values(g0, points) - ecdf_values(gu, points)))
            assert t <= endpoint + 1e-12

    def test_matches_the_brute_force_oracle(self):
        rng = rng_from(62)
        for _ in range(15):
            g0 = rng.normal(0.0, 1.0, rng.integers(2, 12))
            g1 = rng.normal(2.0, 1.0, rng.integers(2, 12))
            gu = rng.normal(1.0, 1.2, rng.integers(2, 15))
            grid_size = int(rng.integers(2, 30))
            t, p_star = t_statistic(scored(gu, g0, g1), grid_size=grid_size)
            t_ref, p_ref = oracle_t(g0, g1, gu, grid_size)
            np.testing.assert_allclose(t, t_ref, atol=1e-12)
            assert abs(p_star - p_ref) <= 1.0 / (grid_size - 1) + 1e-12

    def test_ties_resolve_to_the_smallest_weight(self):
        """Identical class samples make every mixture equal; p_star is 0."""
        rows = scored([0.5, 1.5], [0.0, 1.0], [0.0, 1.0])
        _, p_star = t_statistic(rows)
        assert p_star == 0.0

    def test_two_point_grid(self):
        rows = scored([0.0, 2.0], [0.0, 1.0], [2.0, 3.0])
        t, p_star = t_statistic(rows, grid_size=2)
        t0, _ = oracle_t(np.array([0.0, 1.0]), np.array([2.0, 3.0]), np.array([0.0, 2.0]), 2)
        np.testing.assert_allclose(t, t0, atol=1e-12)
        assert p_star in (0.0, 1.0)

    def test_guards(self):
        rows = scored([0.5], [0.0], [1.0])
        with pytest.raises(EstimationError, match="at least 2"):
            t_statistic(rows, grid_size=1)
        with pytest.raises(EstimationError, match="no unlabeled"):
            t_statistic(scored(np.empty(0), [0.0], [1.0]))
        wide = ScoredDataset(unlabeled=np.zeros((2, 2)),
                             classes=(np.zeros((2, 2)), np.ones((2, 2))))
        with pytest.raises(EstimationError, match="single binary score"):
            t_statistic(wide)


class TestKdeFit:
    """Rule-of-thumb bandwidth and the smoothed bootstrap sampler."""

    def test_silverman_bandwidth_hand_case(self):
        fitted = kde_fit(np.array([1.0, 2.0, 3.0, 4.0, 5.0]))
        sd = np.std([1, 2, 3, 4, 5], ddof=1)
        expected = 0.9 * min(sd, 2.0 / 1.34) * 5 ** (-0.2)
        np.testing.assert_allclose(fitted.bandwidth, expected, atol=1e-15)

    def test_zero_spread_floors_the_bandwidth(self):
        fitted = kde_fit(np.array([3.0, 3.0, 3.0]))
        np.testing.assert_allclose(fitted.bandwidth, 1e-6 * 4.0)
        draws = fitted.sample(rng_from(0), 500)
        assert np.all(np.abs(draws - 3.0) < 5.0 * fitted.bandwidth)

    def test_sample_mean_tracks_the_data_mean(self):
        values = rng_from(11).standard_normal(1000)
        fitted = kde_fit(values)
        draws = fitted.sample(rng_from(99), 10000)
        assert abs(draws.mean() - values.mean()) < 0.1

    def test_needs_two_values(self):
        with pytest.raises(EstimationError, match="two values"):
            kde_fit(np.array([1.0]))


class TestShiftTest:
    """Monte Carlo calibration of the mixture statistic."""

    def null_rows(self, seed=0, n=40, n_u=80, theta=0.4):
        """Scores drawn so the unlabeled block is a true two-point mixture."""
        rng = rng_from(seed, 7)
        count1 = int(round(theta * n_u))
        return scored(
            np.concatenate(
                [rng.normal(0.0, 1.0, n_u - count1), rng.normal(2.0, 1.0, count1)]
            ),
            rng.normal(0.0, 1.0, n),
            rng.normal(2.0, 1.0, n),
        )

    def test_deterministic(self):
        rows = self.null_rows()
        a = shift_test(rows, replicates=23, seed=5, grid_size=101)
        b = shift_test(rows, replicates=23, seed=5, grid_size=101)
        assert a == b

    def test_p_value_is_a_multiple_of_one_over_b(self):
        rows = self.null_rows(seed=3)
        result = shift_test(rows, replicates=19, seed=2, grid_size=101)
        scaled = result.p_value * 19
        np.testing.assert_allclose(scaled, round(scaled), atol=1e-9)
        assert 0.0 <= result.p_value <= 1.0

    def test_exact_copy_gets_p_value_one(self):
        rows = scored([0.1, 0.9, 0.4], [0.0, 0.2, 0.5], [0.1, 0.9, 0.4])
        result = shift_test(rows, replicates=31, seed=1, grid_size=101)
        assert result.statistic == 0.0
        assert result.p_value == 1.0

    def test_gross_violation_is_rejected(self):
        """Unlabeled scores far outside both class laws leave no doubt."""
        rng = rng_from(13)
        rows = scored(
            rng.normal(20.0, 0.2, 50), rng.normal(0.0, 0.2, 25), rng.normal(5.0, 0.2, 25)
        )
        result = shift_test(rows, replicates=99, seed=4, grid_size=101)
        assert result.statistic > 0.5
        assert result.p_value <= 1.0 / 99.0

    def test_reported_weight_and_redraw_prevalence(self):
        rows = self.null_rows(seed=8)
        result = shift_test(rows, replicates=11, seed=6, grid_size=101)
        assert 0.0 <= result.p_star <= 1.0
        assert result.theta_hat == min(1.0, max(0.0, result.p_star))
        payload = result.to_dict()
        assert set(payload) == {
            "statistic",
            "p_star",
            "theta_hat",
            "p_value",
            "replicates",
            "bandwidth0",
            "bandwidth1",
            "seed",
        }
        assert payload["replicates"] == 11

    def test_null_p_values_are_not_anticonservative(self):
        """When the mixture assumption holds, small p-values stay rare.

        Twenty-five independent draws from a true mixture; with B = 79 the
        p-value should behave at least as heavily as uniform.
        """
        p_values = []
        for run in range(25):
            rows = self.null_rows(seed=100 + run, n=30, n_u=60)
            result = shift_test(rows, replicates=79, seed=run, grid_size=101)
            p_values.append(result.p_value)
        p_values = np.array(p_values)
        assert p_values.mean() >= 0.4
        assert np.mean(p_values <= 0.2) <= 0.4

    def test_guards(self):
        rows = self.null_rows()
        with pytest.raises(EstimationError, match="at least one"):
            shift_test(rows, replicates=0)
        single = scored([0.5, 0.7], [0.1], [0.9, 1.0])
        with pytest.raises(EstimationError, match="two values"):
            shift_test(single, replicates=5)
