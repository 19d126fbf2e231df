"""Scenario definition, measurement sampling and the spectrum-sensing model."""
from dataclasses import dataclass, field
from enum import Enum

import numpy as np

DEFAULT_THETA = np.array([0, 1, 0, 0, 0, 0, -2, 0, 0, 0], dtype=float)


class Hypothesis(str, Enum):
    H0 = "H0"
    H1 = "H1"

    @property
    def tag(self):
        return 0 if self is Hypothesis.H0 else 1


# Stream tags keep matrix draws and per-trial noise draws disjoint.
_MATRIX_TAG = 7
_TRIAL_TAG = 11


def make_rng(seed, *keys):
    """Independent generator for the substream identified by ``(seed, *keys)``."""
    return np.random.default_rng(np.random.SeedSequence([int(seed), *[int(k) for k in keys]]))


def matrix_rng(seed):
    return make_rng(seed, _MATRIX_TAG)


def trial_rng(seed, trial, hypothesis):
    return make_rng(seed, _TRIAL_TAG, trial, Hypothesis(hypothesis).tag)


@dataclass(frozen=True)
class Scenario:
    """Ground truth: signal, sensing rows, per-sensor noise and quantizer thresholds."""

    theta: np.ndarray
    measurement_matrix: np.ndarray
    noise_std: np.ndarray
    quant_thresholds: np.ndarray = None

    def __post_init__(self):
        theta = np.asarray(self.theta, dtype=float).reshape(-1)
        H = np.atleast_2d(np.asarray(self.measurement_matrix, dtype=float))
        n = H.shape[0]
        sigma = np.asarray(self.noise_std, dtype=float)
        if sigma.ndim == 0:
            sigma = np.full(n, float(sigma))
        taus = np.zeros(n) if self.quant_thresholds is None else np.asarray(self.quant_thresholds, dtype=float)
        if taus.ndim == 0:
            taus = np.full(n, float(taus))
        if H.shape[1] != theta.size:
            raise ValueError(f"matrix has {H.shape[1]} columns but theta has length {theta.size}")
        if sigma.shape != (n,) or taus.shape != (n,):
            raise ValueError("noise_std and quant_thresholds must have one entry per matrix row")
        if not np.all(sigma > 0):
            raise ValueError("noise_std entries must be strictly positive")
        object.__setattr__(self, "theta", theta)
        object.__setattr__(self, "measurement_matrix", H)
        object.__setattr__(self, "noise_std", sigma)
        object.__setattr__(self, "quant_thresholds", taus)

    @property
    def n_sensors(self):
        return self.measurement_matrix.shape[0]

    @property
    def dim(self):
        return self.measurement_matrix.shape[1]

    def with_thresholds(self, taus):
        return Scenario(self.theta, self.measurement_matrix, self.noise_std, taus)

    def to_dict(self):
        return {
            "theta": self.theta.tolist(),
            "measurement_matrix": self.measurement_matrix.tolist(),
            "noise_std": self.noise_std.tolist(),
            "quant_thresholds": self.quant_thresholds.tolist(),
        }

    @classmethod
    def from_dict(cls, d):
        return cls(
            np.array(d["theta"], dtype=float),
            np.array(d["measurement_matrix"], dtype=float),
            np.array(d["noise_std"], dtype=float),
            np.array(d.get("quant_thresholds", 0.0), dtype=float),
        )


@dataclass(frozen=True)
class Measurement:
    values: np.ndarray
    hypothesis_label: Hypothesis


def generate_measurement_matrix(n_sensors, dim, rng):
    if n_sensors < 1 or dim < 1:
        raise ValueError("n_sensors and dim must both be at least 1")
    return rng.standard_normal((n_sensors, dim))


def noise_sigma_from_snr(theta, snr_db):
    """Noise variance giving the requested SNR for unit-variance Gaussian rows.

    E{(h^T theta)^2} = ||theta||^2 when h ~ N(0, I), so
    sigma^2 = ||theta||^2 * 10^(-snr_db / 10).
    """
    power = float(np.sum(np.asarray(theta, dtype=float) ** 2))
    if power == 0.0:
        raise ValueError("SNR is undefined for an all-zero theta")
    return power * 10.0 ** (-snr_db / 10.0)


def sample_measurements(scenario, hypothesis, rng):
    hypothesis = Hypothesis(hypothesis)
    values = scenario.noise_std * rng.standard_normal(scenario.n_sensors)
    if hypothesis is Hypothesis.H1:
        values = values + scenario.measurement_matrix @ scenario.theta
    return Measurement(values, hypothesis)


def build_scenario(theta, n_sensors, snr_db, rng, quant_thresholds=0.0):
    """Gaussian sensing matrix with equal-power noise set from ``snr_db``."""
    theta = np.asarray(theta, dtype=float)
    H = generate_measurement_matrix(n_sensors, theta.size, rng)
    sigma = np.sqrt(noise_sigma_from_snr(theta, snr_db))
    return Scenario(theta, H, np.full(n_sensors, sigma), np.broadcast_to(quant_thresholds, (n_sensors,)))


@dataclass(frozen=True)
class SpectrumSpec:
    length: int
    tone_bins: tuple = (10, 20, 30)
    tone_amplitudes: tuple = (1.0, 0.5, 2.0)

    def __post_init__(self):
        if len(self.tone_bins) != len(self.tone_amplitudes):
            raise ValueError("tone_bins and tone_amplitudes must have equal length")
        for k in self.tone_bins:
            if not 0 < k < self.length / 2:
                raise ValueError(f"tone bin {k} outside (0, {self.length / 2})")
        if any(a < 0 for a in self.tone_amplitudes):
            raise ValueError("tone amplitudes must be nonnegative")


def inverse_dft_matrix(length):
    """Real part of the inverse DFT matrix, C[m, k] = cos(2 pi k m / M) / M.

    For a real, conjugate-symmetric spectrum psi this gives exactly
    ``ifft(psi) = C @ psi``.
    """
    m = np.arange(length)
    return np.cos(2.0 * np.pi * np.outer(m, m) / length) / length


def spectrum_vector(spec):
    """Sparse real spectrum with half of each tone at bin k and half at M - k."""
    psi = np.zeros(spec.length)
    for k, a in zip(spec.tone_bins, spec.tone_amplitudes):
        psi[k] += a / 2.0
        psi[spec.length - k] += a / 2.0
    return psi


def build_spectrum_scenario(spec, n_sensors, snr_db, rng):
    """Scenario over the spectrum ``psi`` with effective matrix H' = H F^{-1}.

    The returned ``theta`` is the sparse spectrum; the time-domain signal is
    ``inverse_dft_matrix(M) @ theta``.
    """
    psi = spectrum_vector(spec)
    finv = inverse_dft_matrix(spec.length)
    time_signal = finv @ psi
    H = generate_measurement_matrix(n_sensors, spec.length, rng)
    if np.any(time_signal):
        sigma = np.sqrt(noise_sigma_from_snr(time_signal, snr_db))
    else:
        sigma = 1.0
    return Scenario(psi, H @ finv, np.full(n_sensors, sigma), np.zeros(n_sensors))
