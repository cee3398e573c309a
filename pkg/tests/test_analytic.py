import numpy as np
import pytest

from trackqueue import analytic as an
from trackqueue.analytic import AnalyticParams, cascade_wait, doublings_to_exceed_half, invariant_measure


class TestSteadyProbs:
    def test_balanced_load_is_uniform(self):
        assert np.allclose(an.steady_probs(AnalyticParams(1.0, 1.0, 1)), [1 / 3] * 3)

    def test_overloaded_single_buffer(self):
        # Oracle: solve the three-state birth-death balance equations
        # lam*pi_0 = mu*pi_1, lam*pi_1 = mu*pi_2 directly.
        lam, mu = 2.0, 1.0
        a = np.array([[lam, -mu, 0.0], [0.0, lam, -mu], [1.0, 1.0, 1.0]])
        pi = np.linalg.solve(a, [0.0, 0.0, 1.0])
        assert np.allclose(an.steady_probs(AnalyticParams(lam, mu, 1)), pi)
        assert np.allclose(pi, [1 / 7, 2 / 7, 4 / 7])

    def test_underloaded_two_buffer(self):
        probs = an.steady_probs(AnalyticParams(0.5, 1.0, 2))
        assert np.allclose(probs, np.array([8, 4, 2, 1]) / 15)


class TestLambdaEff:
    def test_values(self):
        assert an.lambda_eff(AnalyticParams(2.0, 1.0, 1)) == pytest.approx(6 / 7)
        assert an.lambda_eff(AnalyticParams(1.0, 1.0, 1)) == pytest.approx(2 / 3)

    def test_saturation_limit(self):
        assert an.lambda_eff(AnalyticParams(1e9, 1.0, 1)) == pytest.approx(1.0, rel=1e-6)

    def test_balanced_load_general_buffer(self):
        assert an.lambda_eff(AnalyticParams(1.0, 1.0, 3)) == pytest.approx(4 / 5)


class TestSingleBufferForms:
    def test_peak_age_keep_old(self):
        assert an.peak_age_keep_old_mm12(AnalyticParams(1.0, 1.0)) == pytest.approx(3.0)
        assert an.peak_age_keep_old_mm12(AnalyticParams(2.0, 1.0)) == pytest.approx(
            0.5 + 3 - 2 / 3
        )
        assert an.peak_age_keep_old_mm12(AnalyticParams(1e9, 1.0)) == pytest.approx(
            3.0, rel=1e-6
        )

    def test_peak_age_keep_fresh(self):
        assert an.peak_age_keep_fresh_mm12(AnalyticParams(1.0, 1.0)) == pytest.approx(2.75)
        assert an.peak_age_keep_fresh_mm12(AnalyticParams(2.0, 1.0)) == pytest.approx(
            1 + 2 / 9 + 0.5 + 2 / 3
        )
        assert an.peak_age_keep_fresh_mm12(AnalyticParams(1e9, 1.0)) == pytest.approx(
            2.0, rel=1e-6
        )

    def test_re_keep_old(self):
        assert an.re_keep_old_mm12(AnalyticParams(1.0, 1.0)) == pytest.approx(4 / 9)
        assert an.re_keep_old_mm12(AnalyticParams(1.0, 2.0)) == pytest.approx(15 / 42)
        assert an.re_keep_old_mm12(AnalyticParams(1e9, 1.0)) == pytest.approx(
            1 / 3, rel=1e-6
        )

    def test_re_keep_old_consistency_with_second_moment(self):
        p = AnalyticParams(1.0, 2.0)
        re = an.lambda_eff(AnalyticParams(1.0, 2.0, 1)) * an.second_moment_keep_old_mm12(p) / 6
        assert an.re_keep_old_mm12(p) == pytest.approx(re)

    def test_re_keep_fresh(self):
        assert an.re_keep_fresh_mm12(AnalyticParams(1.0, 1.0)) == pytest.approx(
            (2 / 3) * 3.625 / 6
        )
        assert an.re_keep_fresh_mm12(AnalyticParams(1e9, 1.0)) == pytest.approx(
            1 / 3, rel=1e-6
        )


LAM_GRID = [0.25, 0.5, 0.9, 1.1, 2.0, 4.0]


class TestBufferReductions:
    @pytest.mark.parametrize("lam", LAM_GRID)
    def test_b1_reduces_to_single_buffer_forms(self, lam):
        b1 = AnalyticParams(lam, 1.0, 1)
        pairs = [
            (an.peak_age_keep_old_mm1b, an.peak_age_keep_old_mm12),
            (an.re_keep_old_mm1b, an.re_keep_old_mm12),
            (an.peak_age_keep_fresh_mm1b, an.peak_age_keep_fresh_mm12),
            (an.re_keep_fresh_mm1b, an.re_keep_fresh_mm12),
        ]
        for general, single in pairs:
            assert general(b1) == pytest.approx(single(b1), rel=1e-9)

    def test_critical_load_rejected(self):
        for fn in (
            an.peak_age_keep_old_mm1b,
            an.re_keep_old_mm1b,
            an.peak_age_keep_fresh_mm1b,
            an.re_keep_fresh_mm1b,
        ):
            with pytest.raises(ValueError):
                fn(AnalyticParams(1.0, 1.0, 4))


class TestBufferLimits:
    def test_keep_old_age_heavy_traffic_fixed_buffer(self):
        for B in (1, 2, 4):
            assert an.peak_age_keep_old_mm1b(AnalyticParams(1e6, 1.0, B)) == pytest.approx(
                3.0, rel=1e-5
            )

    def test_keep_old_age_large_buffer_overloaded(self):
        val = an.peak_age_keep_old_mm1b(AnalyticParams(2.0, 1.0, 60))
        assert val == pytest.approx(3.0 + 1.0 / 3.0, rel=1e-6)

    def test_keep_fresh_age_heavy_traffic(self):
        for B in (1, 2, 4):
            assert an.peak_age_keep_fresh_mm1b(
                AnalyticParams(1e6, 1.0, B)
            ) == pytest.approx(2.0, rel=1e-5)

    def test_keep_fresh_age_large_buffer_overloaded(self):
        val = an.peak_age_keep_fresh_mm1b(AnalyticParams(2.0, 1.0, 60))
        assert val == pytest.approx(2.0 + 0.5 + 1.0 / 3.0, rel=1e-6)

    def test_re_keep_old_monotone_to_low_traffic_limit(self):
        lam = 0.9
        values = [
            an.re_keep_old_mm1b(AnalyticParams(lam, 1.0, B))
            for B in (1, 2, 4, 8, 16, 40, 100)
        ]
        assert all(a > b for a, b in zip(values, values[1:]))
        assert values[-1] == pytest.approx(1 / (3 * lam), rel=1e-3)

    def test_re_heavy_traffic_fixed_buffer(self):
        for B in (1, 2, 4):
            assert an.re_keep_old_mm1b(AnalyticParams(1e6, 1.0, B)) == pytest.approx(
                1 / 3, rel=1e-4
            )
            assert an.re_keep_fresh_mm1b(AnalyticParams(1e6, 1.0, B)) == pytest.approx(
                1 / 3, rel=1e-4
            )


class TestDoublings:
    def test_examples(self):
        assert doublings_to_exceed_half(0.6) == 0
        assert doublings_to_exceed_half(0.3) == 1
        assert doublings_to_exceed_half(0.2) == 2

    def test_cap(self):
        assert doublings_to_exceed_half(1e-300) == 60

    def test_domain(self):
        for bad in (0.0, -1.0, 1.5):
            with pytest.raises(ValueError):
                doublings_to_exceed_half(bad)


class TestCascadeWait:
    def test_hand_example(self):
        # x = 0.3: replacements at 0.3 and 0.9, survivor waits 0.1.
        assert cascade_wait(0.3) == pytest.approx(0.1)

    def test_no_cascade_when_in_service_ancient(self):
        assert cascade_wait(1.5) == 1.0

    def test_matches_direct_cascade(self):
        rng = np.random.default_rng(0)
        for x in rng.uniform(0.01, 1.0, 200):
            b = 0.0
            while 2 * b + x <= 1.0:
                b = 2 * b + x
            assert cascade_wait(x) == pytest.approx(1.0 - b)


class TestInvariantMeasure:
    def test_mean_matches_heavy_traffic_constant(self):
        m = invariant_measure(bins=2**13, tol=1e-10)
        assert abs(m.mean - 0.375) < 0.005
        assert m.weights.sum() == pytest.approx(1.0)
        assert (m.weights >= 0).all()

    def test_grid_refinement_stable(self):
        coarse = invariant_measure(bins=2**12, tol=1e-10)
        fine = invariant_measure(bins=2**13, tol=1e-10)
        assert abs(coarse.mean - fine.mean) < 1e-3

    def test_matches_monte_carlo_chain(self):
        # Independent oracle: run the wait chain m' = s * cascade_wait(m/s)
        # directly with exponential service durations.
        rng = np.random.default_rng(9)
        m = 0.3
        total = 0.0
        n = 500_000
        burn = 1000
        for k in range(n + burn):
            s = rng.exponential(1.0)
            m = s * cascade_wait(max(m / s, 1e-12))
            if k >= burn:
                total += m
        iterator = invariant_measure(bins=2**13, tol=1e-10)
        assert abs(total / n - iterator.mean) < 0.005

    def test_validation(self):
        with pytest.raises(ValueError):
            invariant_measure(bins=100)
        with pytest.raises(ValueError):
            invariant_measure(tol=0.0)


def test_heavy_traffic_peak_age():
    assert an.heavy_traffic_peak_age_iaa(1.0) == 2.375
    assert an.heavy_traffic_peak_age_iaa(2.0) == 1.1875
