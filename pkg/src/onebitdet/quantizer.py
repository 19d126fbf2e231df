"""One-bit quantization, Gaussian tail functions and quantizer design.

All tail probabilities use the complementary error function so that
``F(u) = P(w > u)`` keeps full relative accuracy far into both tails.
"""
from dataclasses import dataclass

import numpy as np
from scipy import special

EPS = 1e-12
_SQRT2 = np.sqrt(2.0)


class SingularFIMError(np.linalg.LinAlgError):
    """Raised when a Fisher information (or normal) matrix cannot be inverted."""

    def __init__(self, message, condition=np.inf):
        super().__init__(message)
        self.condition = condition


class ClampCounter:
    """Counts how many probabilities were pulled into [EPS, 1 - EPS]."""

    def __init__(self):
        self.count = 0

    def __repr__(self):
        return f"ClampCounter(count={self.count})"


def gaussian_ccdf(u, sigma=1.0):
    """P(w > u) for w ~ N(0, sigma^2)."""
    return 0.5 * special.erfc(np.asarray(u, dtype=float) / (np.asarray(sigma, dtype=float) * _SQRT2))


def gaussian_pdf(u, sigma=1.0):
    u = np.asarray(u, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return np.exp(-0.5 * (u / sigma) ** 2) / (sigma * np.sqrt(2.0 * np.pi))


def log_pdf(u, sigma=1.0):
    u = np.asarray(u, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    return -0.5 * (u / sigma) ** 2 - np.log(sigma * np.sqrt(2.0 * np.pi))


def gaussian_inverse_ccdf(p, sigma=1.0):
    """Inverse of :func:`gaussian_ccdf`: the ``u`` with P(w > u) = p."""
    p = np.asarray(p, dtype=float)
    if np.any((p <= 0) | (p >= 1)):
        raise ValueError("probability must lie strictly inside (0, 1)")
    return np.asarray(sigma, dtype=float) * _SQRT2 * special.erfcinv(2.0 * p)


def log_ccdf(u, sigma=1.0):
    """log F(u), accurate where F underflows."""
    return special.log_ndtr(-np.asarray(u, dtype=float) / np.asarray(sigma, dtype=float))


def log_cdf(u, sigma=1.0):
    """log(1 - F(u))."""
    return special.log_ndtr(np.asarray(u, dtype=float) / np.asarray(sigma, dtype=float))


def clamp_probability(p, counter=None):
    p = np.asarray(p, dtype=float)
    if counter is not None:
        counter.count += int(np.count_nonzero((p < EPS) | (p > 1.0 - EPS)))
    return np.clip(p, EPS, 1.0 - EPS)


def quantize(x, taus):
    """Sensor bits: 1 where ``x > tau``, else 0 (ties go to 0)."""
    x = np.asarray(x, dtype=float)
    taus = np.broadcast_to(np.asarray(taus, dtype=float), x.shape) if np.ndim(taus) == 0 else np.asarray(taus, dtype=float)
    if x.shape != taus.shape:
        raise ValueError(f"length mismatch: {x.shape} vs {taus.shape}")
    return (x - taus > 0).astype(np.int8)


def threshold_efficiency(tau, sigma=1.0):
    """g(tau) = p(tau)^2 / (F(tau) (1 - F(tau))).

    Evaluated in the log domain so large |tau| stays finite.
    """
    tau = np.asarray(tau, dtype=float)
    sigma = np.asarray(sigma, dtype=float)
    log_p = log_pdf(tau, sigma)
    return np.exp(2.0 * log_p - log_ccdf(tau, sigma) - log_cdf(tau, sigma))


def _efficiency_weights(scenario, theta):
    shift = scenario.quant_thresholds - scenario.measurement_matrix @ np.asarray(theta, dtype=float)
    return threshold_efficiency(shift, scenario.noise_std)


def noncentrality(scenario, theta):
    """lambda_Q = sum_n g(tau_n; sigma_n) (h_n^T theta)^2."""
    proj = scenario.measurement_matrix @ np.asarray(theta, dtype=float)
    g = threshold_efficiency(scenario.quant_thresholds, scenario.noise_std)
    return float(np.sum(g * proj ** 2))


def fisher_information(scenario, theta):
    """FIM of the bit vector about ``theta``: sum_n g(tau_n - h_n^T theta) h_n h_n^T."""
    H = scenario.measurement_matrix
    w = _efficiency_weights(scenario, theta)
    fim = (H * w[:, None]).T @ H
    return 0.5 * (fim + fim.T)


def crb(scenario, theta, max_condition=1e12):
    """Diagonal of the inverse FIM (per-coordinate variance lower bound)."""
    fim = fisher_information(scenario, theta)
    m = fim.shape[0]
    rank = np.linalg.matrix_rank(fim)
    cond = np.linalg.cond(fim)
    if rank < m or not np.isfinite(cond) or cond > max_condition:
        raise SingularFIMError(
            f"Fisher information is singular (rank {rank} < {m} or condition {cond:.3g})",
            condition=cond,
        )
    return np.diag(np.linalg.inv(fim)).copy()


@dataclass(frozen=True)
class InformationReport:
    fim: np.ndarray
    crb_diag: np.ndarray
    noncentrality: float


def information_report(scenario, theta):
    return InformationReport(
        fim=fisher_information(scenario, theta),
        crb_diag=crb(scenario, theta),
        noncentrality=noncentrality(scenario, theta),
    )
