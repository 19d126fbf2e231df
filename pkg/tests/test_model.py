import numpy as np
import pytest

from onebitdet.model import (
    DEFAULT_THETA,
    Hypothesis,
    Scenario,
    SpectrumSpec,
    build_scenario,
    build_spectrum_scenario,
    generate_measurement_matrix,
    inverse_dft_matrix,
    make_rng,
    noise_sigma_from_snr,
    sample_measurements,
    spectrum_vector,
    trial_rng,
)
from onebitdet.quantizer import quantize


class TestScenario:
    def test_rejects_nonpositive_noise(self):
        with pytest.raises(ValueError):
            Scenario(np.ones(2), np.ones((3, 2)), [1.0, 0.0, 1.0])

    def test_rejects_row_mismatch(self):
        with pytest.raises(ValueError):
            Scenario(np.ones(2), np.ones((3, 2)), np.ones(4))
        with pytest.raises(ValueError):
            Scenario(np.ones(2), np.ones((3, 2)), np.ones(3), np.zeros(2))

    def test_scalar_noise_broadcast(self):
        sc = Scenario(np.ones(2), np.ones((3, 2)), 2.0)
        assert sc.noise_std.tolist() == [2.0] * 3
        assert sc.quant_thresholds.tolist() == [0.0] * 3

    def test_dict_round_trip(self, rng):
        sc = Scenario(rng.standard_normal(3), rng.standard_normal((4, 3)), rng.uniform(1, 2, 4), rng.standard_normal(4))
        back = Scenario.from_dict(sc.to_dict())
        for f in ("theta", "measurement_matrix", "noise_std", "quant_thresholds"):
            np.testing.assert_array_equal(getattr(back, f), getattr(sc, f))


class TestMatrix:
    def test_deterministic(self):
        a = generate_measurement_matrix(2, 3, make_rng(5))
        b = generate_measurement_matrix(2, 3, make_rng(5))
        np.testing.assert_array_equal(a, b)

    def test_moments(self):
        col = generate_measurement_matrix(10_000, 1, make_rng(9))
        assert -0.05 <= col.mean() <= 0.05
        assert 0.94 <= col.var() <= 1.06

    def test_default_shape(self):
        assert generate_measurement_matrix(50, 10, make_rng(1)).shape == (50, 10)

    @pytest.mark.parametrize("n,m", [(0, 3), (3, 0)])
    def test_rejects_zero_dims(self, n, m):
        with pytest.raises(ValueError):
            generate_measurement_matrix(n, m, make_rng(1))


class TestSNR:
    def test_default_theta(self):
        assert noise_sigma_from_snr(DEFAULT_THETA, 0.0) == pytest.approx(5.0)

    def test_minus_five_db(self):
        assert noise_sigma_from_snr(DEFAULT_THETA, -5.0) == pytest.approx(5 * 10 ** 0.5, rel=1e-12)
        assert noise_sigma_from_snr(DEFAULT_THETA, -5.0) == pytest.approx(15.811, abs=1e-3)

    def test_unit_norm(self):
        assert noise_sigma_from_snr([0.6, 0.8], 0.0) == pytest.approx(1.0)

    def test_zero_theta_rejected(self):
        with pytest.raises(ValueError):
            noise_sigma_from_snr(np.zeros(4), 0.0)

    def test_empirical_snr(self):
        sc = build_scenario(DEFAULT_THETA, 20_000, 3.0, make_rng(2))
        power = np.mean((sc.measurement_matrix @ sc.theta) ** 2)
        assert 10 * np.log10(power / sc.noise_std[0] ** 2) == pytest.approx(3.0, abs=0.1)


class TestSampling:
    def _noiseless(self, rng):
        return Scenario(rng.standard_normal(4), rng.standard_normal((6, 4)), np.full(6, 1e-12))

    def test_noiseless_h1(self, rng):
        sc = self._noiseless(rng)
        x = sample_measurements(sc, "H1", make_rng(1)).values
        np.testing.assert_allclose(x, sc.measurement_matrix @ sc.theta, atol=1e-10)

    def test_noiseless_h0(self, rng):
        sc = self._noiseless(rng)
        np.testing.assert_allclose(sample_measurements(sc, Hypothesis.H0, make_rng(1)).values, 0.0, atol=1e-10)

    def test_noiseless_bits_are_sign_pattern(self, rng):
        sc = self._noiseless(rng)
        x = sample_measurements(sc, "H1", make_rng(1)).values
        expected = (sc.measurement_matrix @ sc.theta > 0).astype(int)
        assert quantize(x, 0.0).tolist() == expected.tolist()

    def test_h0_variance(self):
        sc = Scenario(np.ones(2), np.ones((5, 2)), np.ones(5))
        xs = np.array([sample_measurements(sc, "H0", trial_rng(3, t, "H0")).values for t in range(10_000)])
        var = xs.var(axis=0)
        assert np.all((var >= 0.94) & (var <= 1.06))

    def test_label_and_length(self, rng):
        sc = self._noiseless(rng)
        m = sample_measurements(sc, "H1", make_rng(0))
        assert m.hypothesis_label is Hypothesis.H1 and m.values.shape == (6,)

    def test_substreams_are_distinct_and_repeatable(self):
        a = trial_rng(1, 0, "H0").standard_normal(3)
        assert np.array_equal(a, trial_rng(1, 0, "H0").standard_normal(3))
        assert not np.array_equal(a, trial_rng(1, 0, "H1").standard_normal(3))
        assert not np.array_equal(a, trial_rng(1, 1, "H0").standard_normal(3))
        assert not np.array_equal(a, trial_rng(2, 0, "H0").standard_normal(3))


class TestSpectrum:
    SPEC = SpectrumSpec(128, (10, 20, 30), (1.0, 0.5, 2.0))

    def test_support(self):
        psi = spectrum_vector(self.SPEC)
        assert sorted(np.flatnonzero(psi)) == [10, 20, 30, 98, 108, 118]
        assert psi[10] == psi[118] == 0.5

    def test_time_signal_is_real_inverse_dft(self):
        psi = spectrum_vector(self.SPEC)
        via_fft = np.fft.ifft(psi)
        assert np.max(np.abs(via_fft.imag)) < 1e-15
        np.testing.assert_allclose(inverse_dft_matrix(128) @ psi, via_fft.real, atol=1e-15)

    def test_single_tone_is_cosine(self):
        M, k, a = 64, 5, 1.7
        theta = inverse_dft_matrix(M) @ spectrum_vector(SpectrumSpec(M, (k,), (a,)))
        m = np.arange(M)
        # direct inverse-DFT evaluation of a/2 at bins k and M-k
        direct = np.real(a / 2 * (np.exp(2j * np.pi * k * m / M) + np.exp(2j * np.pi * (M - k) * m / M))) / M
        np.testing.assert_allclose(theta, direct, atol=1e-15)
        np.testing.assert_allclose(theta, a / M * np.cos(2 * np.pi * k * m / M), atol=1e-15)

    def test_zero_amplitudes(self):
        psi = spectrum_vector(SpectrumSpec(32, (3, 5), (0.0, 0.0)))
        assert not np.any(inverse_dft_matrix(32) @ psi)

    @pytest.mark.parametrize("bins", [(0,), (64,), (70,), (-1,)])
    def test_bins_out_of_range(self, bins):
        with pytest.raises(ValueError):
            SpectrumSpec(128, bins, (1.0,))

    def test_effective_model_consistency(self):
        sc = build_spectrum_scenario(self.SPEC, 40, 0.0, make_rng(4))
        H = generate_measurement_matrix(40, 128, make_rng(4))
        theta = inverse_dft_matrix(128) @ sc.theta
        lhs, rhs = sc.measurement_matrix @ sc.theta, H @ theta
        assert np.linalg.norm(lhs - rhs) <= 1e-10 * np.linalg.norm(rhs)

    def test_noise_set_from_time_signal(self):
        sc = build_spectrum_scenario(self.SPEC, 10, 0.0, make_rng(4))
        theta = inverse_dft_matrix(128) @ sc.theta
        assert sc.noise_std[0] ** 2 == pytest.approx(np.sum(theta ** 2))

    def test_deterministic(self):
        a = build_spectrum_scenario(self.SPEC, 10, 0.0, make_rng(4))
        b = build_spectrum_scenario(self.SPEC, 10, 0.0, make_rng(4))
        np.testing.assert_array_equal(a.measurement_matrix, b.measurement_matrix)
