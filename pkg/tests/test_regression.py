"""Prevalence-curve tests: local averaging, bandwidth choice, both correctors."""

import numpy as np
import pytest

from quantify import (
    EstimationError,
    ExternalScore,
    RawDataset,
    ScenarioSpec,
    cc_regress,
    cv_bandwidth,
    generate,
    nadaraya_watson,
    ratio_regress,
    rng_from,
)

SCORE = ExternalScore(columns=(0,))


def covariate_dataset(z_u, g_u, class0=(0.0, 0.0), class1=(1.0, 1.0)) -> RawDataset:
    """Labeled rows pin the group means; unlabeled rows carry (z, g) pairs."""
    z_u = np.asarray(z_u, dtype=float)
    g_u = np.asarray(g_u, dtype=float)
    n0, n1, n_u = len(class0), len(class1), z_u.size
    return RawDataset(
        features=np.concatenate([class0, class1, g_u]),
        labels=np.concatenate([np.zeros(n0, int), np.ones(n1, int), -np.ones(n_u, int)]),
        set_indicator=np.concatenate([np.ones(n0 + n1, int), np.zeros(n_u, int)]),
        covariate=np.concatenate([np.zeros(n0 + n1), z_u]),
    )


class TestNadarayaWatson:
    def test_constant_values(self):
        out = nadaraya_watson(
            np.array([0.0, 1.0, 2.0]), np.full(3, 4.2), 0.7, np.linspace(-1, 3, 9)
        )
        np.testing.assert_allclose(out, 4.2, atol=1e-12)

    def test_single_pair_everywhere(self):
        out = nadaraya_watson(np.array([0.3]), np.array([2.5]), 0.5, np.array([-5.0, 0.3, 40.0]))
        np.testing.assert_allclose(out, 2.5)

    def test_symmetric_midpoint(self):
        out = nadaraya_watson(
            np.array([0.0, 1.0]), np.array([0.0, 1.0]), 0.5, np.array([0.5])
        )
        np.testing.assert_allclose(out, 0.5, atol=1e-12)

    def test_far_query_falls_back_to_the_nearest_point(self):
        """Once every kernel weight underflows, the nearest value is used."""
        out = nadaraya_watson(
            np.array([0.0, 1.0]), np.array([3.0, 7.0]), 0.01, np.array([-50.0, 50.0])
        )
        np.testing.assert_allclose(out, [3.0, 7.0])

    def test_stays_within_the_value_range(self):
        rng = rng_from(3)
        z = rng.random(40)
        g = rng.normal(0.0, 1.0, 40)
        out = nadaraya_watson(z, g, 0.1, np.linspace(0, 1, 21))
        assert out.min() >= g.min() - 1e-12
        assert out.max() <= g.max() + 1e-12

    def test_guards(self):
        with pytest.raises(EstimationError, match="bandwidth must be positive"):
            nadaraya_watson(np.array([0.0]), np.array([1.0]), 0.0, np.array([0.0]))
        with pytest.raises(EstimationError, match="matching"):
            nadaraya_watson(np.array([0.0, 1.0]), np.array([1.0]), 0.5, np.array([0.0]))
        with pytest.raises(EstimationError, match="matching"):
            nadaraya_watson(np.empty(0), np.empty(0), 0.5, np.array([0.0]))


class TestCvBandwidth:
    """Leave-one-out choice of the smoothing bandwidth."""

    def test_noise_rejects_a_vanishing_candidate(self):
        """On pure noise a vanishing bandwidth degrades to nearest-neighbour
        prediction (squared error about twice the noise variance per point),
        so a moderate candidate that averages toward the mean must win."""
        rng = rng_from(10)
        z = np.linspace(0.0, 1.0, 80)
        values = rng.standard_normal(80)
        base = float(np.std(z, ddof=1)) * 80 ** (-0.2)
        assert cv_bandwidth(z, values, candidates=[1e-12, base]) == base

    def test_default_candidates_scale_the_rule_of_thumb(self):
        rng = rng_from(11)
        z = rng.random(60)
        values = np.sin(2 * np.pi * z) + 0.1 * rng.standard_normal(60)
        chosen = cv_bandwidth(z, values)
        base = float(np.std(z, ddof=1)) * 60 ** (-0.2)
        expected = {base * f for f in (0.25, 0.5, 1.0, 2.0, 4.0)}
        assert any(abs(chosen - e) < 1e-12 for e in expected)

    def test_candidate_order_and_duplicates_do_not_matter(self):
        rng = rng_from(13)
        z = np.linspace(0.0, 1.0, 50)
        values = np.cos(3 * z) + 0.1 * rng.standard_normal(50)
        forward = cv_bandwidth(z, values, candidates=[0.05, 0.2, 0.8])
        backward = cv_bandwidth(z, values, candidates=[0.8, 0.05, 0.2, 0.05])
        assert forward == backward

    def test_single_candidate_is_echoed(self):
        z = np.linspace(0.0, 1.0, 10)
        assert cv_bandwidth(z, np.full(10, 2.0), candidates=[0.7, 0.7]) == 0.7

    def test_tracks_the_smoothness_of_the_signal(self):
        """A rapidly oscillating target prefers a narrower bandwidth than a
        constant-plus-noise target given the same candidate pair."""
        rng = rng_from(12)
        z = np.linspace(0.0, 1.0, 120)
        wiggly = np.sin(8 * np.pi * z) + 0.05 * rng.standard_normal(120)
        flat = 0.5 + 0.05 * rng.standard_normal(120)
        candidates = [0.02, 0.5]
        assert cv_bandwidth(z, wiggly, candidates) == 0.02
        assert cv_bandwidth(z, flat, candidates) == 0.5

    def test_guards(self):
        with pytest.raises(EstimationError, match="at least 3"):
            cv_bandwidth(np.array([0.0, 1.0]), np.array([0.0, 1.0]))
        with pytest.raises(EstimationError, match="positive"):
            cv_bandwidth(np.linspace(0, 1, 5), np.zeros(5), candidates=[0.0])
        with pytest.raises(EstimationError, match="no spread"):
            cv_bandwidth(np.zeros(5), np.arange(5.0))


class TestRatioRegress:
    """Pointwise ratio correction of the smoothed unlabeled score curve."""

    def test_unlabeled_scores_at_mu0_give_the_zero_curve(self):
        data = covariate_dataset(np.linspace(0, 1, 30), np.zeros(30))
        curve = ratio_regress(data, SCORE, np.linspace(0, 1, 11))
        np.testing.assert_allclose(curve.values, 0.0, atol=1e-12)
        assert curve.method == "ratio"

    def test_unlabeled_scores_at_mu1_give_the_unit_curve(self):
        data = covariate_dataset(np.linspace(0, 1, 30), np.ones(30))
        curve = ratio_regress(data, SCORE, np.linspace(0, 1, 11))
        np.testing.assert_allclose(curve.values, 1.0, atol=1e-12)

    def test_midpoint_scores_give_the_half_curve(self):
        data = covariate_dataset(np.linspace(0, 1, 30), np.full(30, 0.5))
        curve = ratio_regress(data, SCORE, np.linspace(0, 1, 11))
        np.testing.assert_allclose(curve.values, 0.5, atol=1e-12)

    def test_two_plateau_recovery(self):
        """Scores at mu0 for small z and mu1 for large z produce a curve near
        zero on the left plateau and near one on the right."""
        z = np.concatenate([np.linspace(0, 0.4, 25), np.linspace(0.6, 1.0, 25)])
        g = np.concatenate([np.zeros(25), np.ones(25)])
        data = covariate_dataset(z, g)
        curve = ratio_regress(data, SCORE, np.array([0.05, 0.95]), bandwidth=0.05)
        assert curve.values[0] < 0.05
        assert curve.values[1] > 0.95

    def test_default_bandwidth_rule(self):
        z = np.linspace(0, 1, 40)
        data = covariate_dataset(z, np.full(40, 0.25))
        curve = ratio_regress(data, SCORE, np.linspace(0, 1, 5))
        np.testing.assert_allclose(
            curve.bandwidth, float(np.std(z, ddof=1)) * 40 ** (-0.2)
        )

    def test_cv_bandwidth_path(self):
        rng = rng_from(15)
        z = np.linspace(0, 1, 60)
        g = np.clip(0.5 + 0.3 * np.sin(2 * np.pi * z) + 0.05 * rng.standard_normal(60), 0, 1)
        data = covariate_dataset(z, g)
        curve = ratio_regress(data, SCORE, np.linspace(0, 1, 7), bandwidth="cv")
        assert curve.bandwidth == cv_bandwidth(z, g)

    def test_values_are_clamped(self):
        z = np.linspace(0, 1, 20)
        data = covariate_dataset(z, np.concatenate([np.full(10, -2.0), np.full(10, 3.0)]))
        curve = ratio_regress(data, SCORE, np.linspace(0, 1, 9), bandwidth=0.05)
        assert np.all((curve.values >= 0.0) & (curve.values <= 1.0))

    def test_curve_rows(self):
        data = covariate_dataset(np.linspace(0, 1, 10), np.full(10, 0.5))
        curve = ratio_regress(data, SCORE, np.array([0.2, 0.8]))
        rows = curve.rows()
        assert rows[0][0] == 0.2 and rows[1][0] == 0.8
        np.testing.assert_allclose([value for _, value in rows], 0.5, atol=1e-12)

    def test_guards(self):
        data = covariate_dataset(np.linspace(0, 1, 10), np.full(10, 0.5))
        grid = np.linspace(0, 1, 5)
        with pytest.raises(EstimationError, match="strictly increasing"):
            ratio_regress(data, SCORE, np.array([0.5, 0.5]))
        with pytest.raises(EstimationError, match="nonempty and finite"):
            ratio_regress(data, SCORE, np.array([]))
        with pytest.raises(EstimationError, match="nonempty and finite"):
            ratio_regress(data, SCORE, np.array([0.0, np.inf]))
        with pytest.raises(EstimationError, match="number or 'cv'"):
            ratio_regress(data, SCORE, grid, bandwidth="auto")

        flat = covariate_dataset(np.linspace(0, 1, 10), np.full(10, 0.5),
                                 class0=(0.5, 0.5), class1=(0.5, 0.5))
        with pytest.raises(EstimationError, match="separability"):
            ratio_regress(flat, SCORE, grid)

        no_z = RawDataset(
            features=[[0.0], [1.0], [0.5]], labels=[0, 1, -1], set_indicator=[1, 1, 0]
        )
        with pytest.raises(EstimationError, match="covariate"):
            ratio_regress(no_z, SCORE, grid)


class TestCcRegress:
    def test_all_scores_above_the_threshold(self):
        data = covariate_dataset(np.linspace(0, 1, 20), np.full(20, 0.9))
        curve = cc_regress(data, SCORE, np.linspace(0, 1, 7), threshold=0.5)
        np.testing.assert_allclose(curve.values, 1.0, atol=1e-12)
        assert curve.method == "cc"

    def test_matches_ratio_correction_for_binary_scores(self):
        """With group means 0 and 1 and indicator scores the two curves agree."""
        rng = rng_from(18)
        z = np.sort(rng.random(50))
        g = (rng.random(50) < np.clip(z, 0.1, 0.9)).astype(float)
        data = covariate_dataset(z, g)
        grid = np.linspace(0.05, 0.95, 13)
        ratio = ratio_regress(data, SCORE, grid, bandwidth=0.2)
        cc = cc_regress(data, SCORE, grid, threshold=0.5, bandwidth=0.2)
        np.testing.assert_allclose(cc.values, ratio.values, atol=1e-12)

    def test_scores_independent_of_z_flatten(self):
        rng = rng_from(19)
        z = rng.random(400)
        g = (rng.random(400) < 0.4).astype(float)
        data = covariate_dataset(z, g)
        curve = cc_regress(data, SCORE, np.linspace(0.1, 0.9, 17), threshold=0.5)
        assert curve.values.max() - curve.values.min() < 0.25
        assert abs(curve.values.mean() - 0.4) < 0.1


class TestSineScenarioSmoke:
    def test_single_seed_curve_recovery(self):
        """Well separated classes let the corrected curve track the sine."""
        spec = ScenarioSpec(
            kind="regression_sine", n_unlabeled=1000, n_class=(500, 500), mu=2.0
        )
        data = generate(spec, seed=52)
        grid = np.linspace(0.0, 1.0, 101)
        curve = ratio_regress(data, SCORE, grid)
        truth = 0.5 * (np.sin(2.0 * np.pi * grid) + 1.0)
        mise = float(np.mean((curve.values - truth) ** 2))
        assert mise < 0.03
