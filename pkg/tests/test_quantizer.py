import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from onebitdet.model import Scenario
from onebitdet.quantizer import (
    ClampCounter,
    SingularFIMError,
    clamp_probability,
    crb,
    fisher_information,
    gaussian_ccdf,
    gaussian_inverse_ccdf,
    gaussian_pdf,
    log_cdf,
    log_ccdf,
    noncentrality,
    quantize,
    threshold_efficiency,
)

from conftest import random_scenario

mp.mp.dps = 30


def mp_ccdf(u, s=1.0):
    return mp.erfc(mp.mpf(u) / (mp.mpf(s) * mp.sqrt(2))) / 2


def mp_g(tau, s=1.0):
    tau, s = mp.mpf(tau), mp.mpf(s)
    p = mp.exp(-(tau / s) ** 2 / 2) / (s * mp.sqrt(2 * mp.pi))
    F = mp_ccdf(tau, s)
    return p ** 2 / (F * (1 - F))


class TestTails:
    @pytest.mark.parametrize("sigma", [0.1, 1.0, 7.5])
    def test_ccdf_median(self, sigma):
        assert gaussian_ccdf(0.0, sigma) == 0.5

    def test_ccdf_upper_quantile(self):
        assert abs(gaussian_ccdf(1.959964 * 3.0, 3.0) - 0.025) < 1e-6

    @pytest.mark.parametrize("u", [-30.0, -5.0, -0.3, 0.0, 1.7, 8.0, 37.0])
    def test_ccdf_relative_accuracy(self, u):
        exact = float(mp_ccdf(u))
        assert gaussian_ccdf(u) == pytest.approx(exact, rel=1e-12)

    def test_inverse_ccdf(self):
        from scipy.optimize import brentq

        root = brentq(lambda u: gaussian_ccdf(u) - 0.3, -5, 5, xtol=1e-14)
        assert abs(gaussian_inverse_ccdf(0.3, 1.0) - 0.524401) < 1e-5
        assert gaussian_inverse_ccdf(0.3) == pytest.approx(root, abs=1e-12)

    @pytest.mark.parametrize("p", [0.0, 1.0, -0.2, 1.5])
    def test_inverse_ccdf_rejects_out_of_range(self, p):
        with pytest.raises(ValueError):
            gaussian_inverse_ccdf(p)

    def test_log_forms_deep_tail(self):
        u = 40.0
        assert log_ccdf(u) == pytest.approx(float(mp.log(mp_ccdf(u))), rel=1e-12)
        assert log_cdf(-u) == pytest.approx(float(mp.log(mp_ccdf(u))), rel=1e-12)
        assert np.isfinite(log_ccdf(u))

    def test_pdf_normalised(self):
        from scipy.integrate import quad

        assert quad(lambda u: gaussian_pdf(u, 2.0), -np.inf, np.inf)[0] == pytest.approx(1.0, abs=1e-10)

    @given(st.floats(-20, 20), st.floats(-20, 20))
    def test_ccdf_decreasing(self, a, b):
        if a < b:
            assert gaussian_ccdf(a) >= gaussian_ccdf(b)

    def test_clamp_counts(self):
        counter = ClampCounter()
        out = clamp_probability(np.array([0.0, 0.5, 1.0, 1e-20]), counter)
        assert counter.count == 3
        assert out.min() == 1e-12 and out.max() == 1 - 1e-12


class TestQuantize:
    def test_basic(self):
        assert quantize([0.5, -0.3], [0, 0]).tolist() == [1, 0]

    def test_boundary_goes_to_zero(self):
        x = np.array([0.2, -1.0, 3.0])
        assert quantize(x, x).tolist() == [0, 0, 0]

    def test_shifted(self):
        assert quantize([1, 2, 3], [2, 2, 2]).tolist() == [0, 0, 1]

    def test_length_mismatch(self):
        with pytest.raises(ValueError):
            quantize([1, 2, 3], [0, 0])

    def test_bits_are_binary(self, rng):
        bits = quantize(rng.standard_normal(100), rng.standard_normal(100))
        assert set(np.unique(bits)) <= {0, 1}


class TestThresholdEfficiency:
    def test_zero_threshold_is_two_over_pi(self):
        assert abs(threshold_efficiency(0.0, 1.0) - 2 / np.pi) < 1e-12

    @pytest.mark.parametrize("tau", [0.5, 1.3, 2.7])
    def test_symmetric(self, tau):
        assert threshold_efficiency(tau, 1.4) == pytest.approx(threshold_efficiency(-tau, 1.4), rel=1e-14)

    @pytest.mark.parametrize("tau", [-3.0, 0.25, 1.0, 4.5])
    def test_matches_high_precision(self, tau):
        assert threshold_efficiency(tau, 1.0) == pytest.approx(float(mp_g(tau)), rel=1e-11)

    @pytest.mark.parametrize("sigma", [0.5, 1.0, 3.0])
    def test_grid_argmax_at_zero(self, sigma):
        step = 1e-3 * sigma
        grid = np.arange(-5 * sigma, 5 * sigma + step / 2, step)
        g = threshold_efficiency(grid, sigma)
        assert abs(grid[np.argmax(g)]) <= step
        peak = np.argmax(g)
        # unimodal: nondecreasing up to the peak, nonincreasing after
        assert np.all(np.diff(g[: peak + 1]) >= -1e-15)
        assert np.all(np.diff(g[peak:]) <= 1e-15)

    def test_accurate_far_out(self):
        assert threshold_efficiency(30.0) == pytest.approx(float(mp_g(30.0)), rel=1e-9)


class TestNoncentrality:
    def test_zero_signal(self, rng):
        sc = random_scenario(rng)
        assert noncentrality(sc, np.zeros(sc.dim)) == 0.0

    @pytest.mark.parametrize("seed", range(5))
    def test_zero_threshold_closed_form(self, seed):
        r = np.random.default_rng(seed)
        sc = random_scenario(r, n=30, m=6, taus=np.zeros(30))
        proj = sc.measurement_matrix @ sc.theta
        expected = 2 / np.pi * np.sum(proj ** 2 / sc.noise_std ** 2)
        assert noncentrality(sc, sc.theta) == pytest.approx(expected, rel=1e-12)

    def test_scalar_case(self):
        sc = Scenario([1.0], [[1.0]], [1.0], [1.0])
        assert noncentrality(sc, sc.theta) == pytest.approx(0.438628861102214, rel=1e-12)

    def test_row_sign_flip_invariance(self, rng):
        sc = random_scenario(rng, n=12, m=4, taus=np.zeros(12))
        H = sc.measurement_matrix.copy()
        H[[1, 5, 7]] *= -1
        flipped = Scenario(sc.theta, H, sc.noise_std, sc.quant_thresholds)
        assert noncentrality(flipped, sc.theta) == pytest.approx(noncentrality(sc, sc.theta), rel=1e-13)


class TestFisherInformation:
    def test_scalar(self):
        sc = Scenario([0.0], [[1.0]], [1.0], [0.0])
        assert fisher_information(sc, sc.theta)[0, 0] == pytest.approx(2 / np.pi, rel=1e-14)

    def test_symmetric_psd(self, rng):
        for _ in range(10):
            sc = random_scenario(rng, n=20, m=5)
            fim = fisher_information(sc, sc.theta)
            assert np.max(np.abs(fim - fim.T)) <= 1e-12
            assert np.linalg.eigvalsh(fim).min() >= -1e-10

    def test_zero_theta_closed_form(self, rng):
        H = rng.standard_normal((15, 4))
        sc = Scenario(np.zeros(4), H, np.full(15, 1.7), np.zeros(15))
        expected = 2 / (np.pi * 1.7 ** 2) * H.T @ H
        np.testing.assert_allclose(fisher_information(sc, sc.theta), expected, rtol=1e-12)

    def test_scales_inverse_sigma_squared(self, rng):
        H = rng.standard_normal((15, 4))
        one = fisher_information(Scenario(np.zeros(4), H, np.ones(15), np.zeros(15)), np.zeros(4))
        two = fisher_information(Scenario(np.zeros(4), H, np.full(15, 2.0), np.zeros(15)), np.zeros(4))
        np.testing.assert_allclose(two, one / 4, rtol=1e-12)


class TestCRB:
    def test_scalar(self):
        sc = Scenario([0.4], [[1.3]], [0.9], [0.2])
        fim = fisher_information(sc, sc.theta)[0, 0]
        assert crb(sc, sc.theta)[0] == pytest.approx(1 / fim, rel=1e-12)

    def test_underdetermined_is_singular(self, rng):
        sc = Scenario(np.ones(10), rng.standard_normal((5, 10)), np.ones(5), np.zeros(5))
        with pytest.raises(SingularFIMError) as err:
            crb(sc, sc.theta)
        assert err.value.condition > 1e12

    def test_identity_information(self):
        # orthogonal columns with equal norms at theta = tau = 0 give I = c * Identity
        Q, _ = np.linalg.qr(np.random.default_rng(3).standard_normal((8, 8)))
        H = 2.0 * Q[:, :4]
        sc = Scenario(np.zeros(4), H, np.ones(8), np.zeros(8))
        c = 4.0 * 2 / np.pi
        np.testing.assert_allclose(crb(sc, sc.theta), np.full(4, 1 / c), rtol=1e-12)

    @settings(max_examples=25, deadline=None)
    @given(st.integers(0, 10_000))
    def test_adding_a_sensor_never_increases_bound(self, seed):
        r = np.random.default_rng(seed)
        sc = random_scenario(r, n=8, m=3)
        extra = Scenario(sc.theta, np.vstack([sc.measurement_matrix, r.standard_normal(3)]),
                         np.append(sc.noise_std, 1.0), np.append(sc.quant_thresholds, 0.1))
        assert np.all(crb(extra, sc.theta) <= crb(sc, sc.theta) * (1 + 1e-10))
