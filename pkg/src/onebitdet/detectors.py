"""Fusion-center test statistics for every detector in the family."""
from dataclasses import dataclass

import numpy as np

from .estimation import project
from .quantizer import (
    ClampCounter,
    clamp_probability,
    gaussian_ccdf,
    gaussian_inverse_ccdf,
)


@dataclass(frozen=True)
class DetectorVerdict:
    statistic: float
    threshold: float
    decide_h1: bool


def decide(statistic, threshold):
    return DetectorVerdict(float(statistic), float(threshold), bool(statistic > threshold))


@dataclass(frozen=True)
class FusionWeights:
    """Per-sensor fusion weights.

    Sign-GLRT / oracle weights fill ``alphas`` and ``betas``; double-detector
    weights fill ``rhos``, ``p_d`` and ``p_fa_internal``.
    """

    alphas: np.ndarray = None
    betas: np.ndarray = None
    rhos: np.ndarray = None
    p_d: np.ndarray = None
    p_fa_internal: float = None
    h0_probs: np.ndarray = None
    clamped: int = 0

    @property
    def values(self):
        return self.alphas if self.alphas is not None else self.rhos

    @property
    def offset(self):
        """Constant turning ``sum(bits * values)`` into the exact log-likelihood ratio."""
        if self.alphas is not None:
            return np.sum(np.log1p(-self.betas) - np.log1p(-self.h0_probs), axis=-1)
        return np.sum(np.log1p(-self.p_d) - np.log1p(-self.p_fa_internal), axis=-1)


def _logit(p):
    return np.log(p) - np.log1p(-p)


def sign_glrt_weights(theta_hat, H, noise_std, taus=0.0):
    """beta_n = F(tau_n - h_n^T theta_hat), alpha_n = logit(beta_n) - logit(F(tau_n)).

    With tau_n = 0 the second term vanishes and alpha_n = ln(beta_n / (1 - beta_n)).
    A (trials, M) ``theta_hat`` gives (trials, N) weight arrays.
    """
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    noise_std = np.broadcast_to(np.asarray(noise_std, dtype=float), (n,))
    taus = np.broadcast_to(np.asarray(taus, dtype=float), (n,))
    counter = ClampCounter()
    betas = clamp_probability(gaussian_ccdf(taus - project(np.asarray(theta_hat, dtype=float), H), noise_std), counter)
    h0 = clamp_probability(gaussian_ccdf(taus, noise_std), counter)
    alphas = _logit(betas) - _logit(h0)
    return FusionWeights(alphas=alphas, betas=betas, h0_probs=h0, clamped=counter.count)


def _weighted_sum(bits, values):
    bits = np.asarray(bits, dtype=float)
    if bits.shape[-1] != values.shape[-1]:
        raise ValueError(f"length mismatch: {bits.shape} bits vs {values.shape} weights")
    total = (bits * values).sum(axis=-1)
    return float(total) if total.ndim == 0 else total


def sign_glrt_statistic(bits, weights):
    return _weighted_sum(bits, weights.alphas)


def sign_glrt_threshold(eta, weights):
    """eta' = ln((1/2)^N eta) - sum ln(1 - beta_n), the threshold paired with a likelihood-ratio level eta."""
    n = weights.alphas.size
    return float(n * np.log(0.5) + np.log(eta) - np.sum(np.log1p(-weights.betas)))


def uniform_glrt_statistic(bits):
    total = np.asarray(bits, dtype=float).sum(axis=-1)
    return float(total) if total.ndim == 0 else total


def internal_thresholds(p_fa_internal, noise_std):
    if not 0.0 < p_fa_internal < 1.0:
        raise ValueError(f"p_fa_internal must lie in (0, 1), got {p_fa_internal}")
    return gaussian_inverse_ccdf(p_fa_internal, np.asarray(noise_std, dtype=float))


def internal_detector(x, p_fa_internal, noise_std):
    """Per-sensor threshold test: c_n = 1 iff x_n >= tau_n."""
    x = np.asarray(x, dtype=float)
    taus = np.broadcast_to(internal_thresholds(p_fa_internal, noise_std), x.shape)
    return (x >= taus).astype(np.int8)


def double_detector_weights(theta_hat, H, noise_std, p_fa_internal):
    """p_dn = F(tau_n - h_n^T theta_hat), rho_n = logit(p_dn) - logit(P_fa)."""
    H = np.asarray(H, dtype=float)
    n = H.shape[0]
    noise_std = np.broadcast_to(np.asarray(noise_std, dtype=float), (n,))
    taus = internal_thresholds(p_fa_internal, noise_std)
    counter = ClampCounter()
    p_d = clamp_probability(gaussian_ccdf(taus - project(np.asarray(theta_hat, dtype=float), H), noise_std), counter)
    p_fa = float(clamp_probability(p_fa_internal, counter))
    rhos = np.log(p_d * (1.0 - p_fa) / ((1.0 - p_d) * p_fa))
    return FusionWeights(rhos=rhos, p_d=p_d, p_fa_internal=p_fa, clamped=counter.count)


def double_detector_statistic(c, weights):
    return _weighted_sum(c, weights.rhos)


def double_detector_threshold(gamma, weights):
    """gamma' = ln(gamma (1 - P_fa)^N / prod(1 - p_dn))."""
    n = weights.rhos.size
    return float(np.log(gamma) + n * np.log1p(-weights.p_fa_internal) - np.sum(np.log1p(-weights.p_d)))


def oracle_statistic(bits, theta_true, H, noise_std, taus=0.0):
    return sign_glrt_statistic(bits, sign_glrt_weights(theta_true, H, noise_std, taus))


def clairvoyant_statistic(x, theta_hat, H, noise_std, printed_sign=False):
    """sum_n [2 x_n a_n - a_n^2] / sigma_n^2 with a_n = h_n^T theta_hat.

    This is 2 ln[p(x | theta_hat) / p(x | H0)]. ``printed_sign=True`` returns
    the variant with ``+ a_n^2`` for side-by-side diagnostics only.
    """
    x = np.asarray(x, dtype=float)
    a = project(np.asarray(theta_hat, dtype=float), np.asarray(H, dtype=float))
    var = np.asarray(noise_std, dtype=float) ** 2
    quad = a ** 2 if printed_sign else -a ** 2
    total = ((2.0 * x * a + quad) / var).sum(axis=-1)
    return float(total) if total.ndim == 0 else total


def clairvoyant_threshold(delta):
    return 2.0 * float(np.log(delta))


def energy_statistic(x):
    total = (np.asarray(x, dtype=float) ** 2).sum(axis=-1)
    return float(total) if total.ndim == 0 else total
