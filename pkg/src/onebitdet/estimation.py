"""Estimators of the sparse signal: BIHT, concave one-bit MLE, clairvoyant WLS."""
from dataclasses import dataclass
from enum import Enum

import numpy as np

from .quantizer import SingularFIMError, log_cdf, log_ccdf, log_pdf


class NormMode(str, Enum):
    UNIT = "unit"
    ORACLE = "oracle"
    RAW = "raw"


@dataclass(frozen=True)
class SparseEstimate:
    theta_hat: np.ndarray
    sparsity: int
    norm_mode: NormMode
    iterations_used: int
    converged: bool
    at_bound: bool = False


@dataclass(frozen=True)
class BihtConfig:
    sparsity: int
    step_size: float = None  # None -> 1 / lambda_max(H^T H)
    max_iterations: int = 100
    norm_mode: NormMode = NormMode.UNIT
    oracle_norm: float = None
    monotone: bool = False

    def __post_init__(self):
        if self.sparsity < 1:
            raise ValueError("sparsity must be at least 1")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.step_size is not None and not self.step_size > 0:
            raise ValueError("step_size must be positive")
        object.__setattr__(self, "norm_mode", NormMode(self.norm_mode))
        if self.norm_mode is NormMode.ORACLE and self.oracle_norm is None:
            raise ValueError("oracle norm mode needs oracle_norm")


def project(thetas, H):
    """Row-wise H @ theta for an (..., M) array.

    einsum (optimize off) rather than BLAS so each row's arithmetic is the
    same whatever the batch size; batched and single-trial runs agree bitwise.
    """
    return np.einsum("...j,kj->...k", thetas, H)


def backproject(v, H):
    """Row-wise H^T @ v for an (..., N) array (see :func:`project`)."""
    return np.einsum("...k,kj->...j", v, H)


def hard_threshold(theta, k):
    """Keep the ``k`` largest-magnitude entries; ties keep the lower index."""
    theta = np.asarray(theta, dtype=float)
    if k >= theta.size:
        return theta.copy()
    keep = np.argsort(-np.abs(theta), kind="stable")[:k]
    out = np.zeros_like(theta)
    out[keep] = theta[keep]
    return out


def signs_pm(u):
    """+1 where u > 0, -1 otherwise (same tie rule as the quantizer)."""
    return np.where(np.asarray(u) > 0, 1.0, -1.0)


def sign_residual(bits, H, taus, theta):
    """Number of sensors whose bit disagrees with sign(h_n^T theta - tau_n)."""
    s = 2.0 * np.asarray(bits, dtype=float) - 1.0
    return int(np.count_nonzero(s != signs_pm(project(np.asarray(theta, dtype=float), H) - taus)))


def spectral_step(H):
    """1 / lambda_max(H^T H) via power iteration."""
    H = np.asarray(H, dtype=float)
    v = np.ones(H.shape[1]) / np.sqrt(H.shape[1])
    lam = 0.0
    for _ in range(200):
        w = H.T @ (H @ v)
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 1.0
        v = w / norm
        new = float(v @ (H.T @ (H @ v)))
        if abs(new - lam) <= 1e-10 * max(new, 1.0):
            lam = new
            break
        lam = new
    return 1.0 / lam


def apply_norm_mode(theta, mode, oracle_norm=None):
    mode = NormMode(mode)
    norm = np.sqrt((theta ** 2).sum(axis=-1))
    if mode is NormMode.RAW or norm == 0.0:
        return theta
    if mode is NormMode.UNIT:
        return theta / norm
    return theta * (oracle_norm / norm)


def biht(bits, H, taus, config, step_size=None):
    """Binary iterative hard thresholding.

    ``step_size`` overrides ``config.step_size``; callers running many trials
    on one matrix pass a precomputed value to skip the power iteration.
    """
    bits = np.asarray(bits)
    H = np.asarray(H, dtype=float)
    if bits.size == 0:
        raise ValueError("empty bit vector")
    if bits.shape[0] != H.shape[0]:
        raise ValueError(f"{bits.shape[0]} bits for a matrix with {H.shape[0]} rows")
    k = config.sparsity
    if k > H.shape[1]:
        raise ValueError(f"sparsity {k} exceeds dimension {H.shape[1]}")
    taus = np.broadcast_to(np.asarray(taus, dtype=float), bits.shape)
    mu = step_size or config.step_size or spectral_step(H)
    s = 2.0 * bits - 1.0

    theta = np.zeros(H.shape[1])
    residual = sign_residual(bits, H, taus, theta)
    converged = False
    it = 0
    for it in range(1, config.max_iterations + 1):
        # np.sign (0 at a tie) in the update so the first step from 0 with
        # tau = 0 is the back-projection H^T s.
        grad = backproject(s - np.sign(project(theta, H) - taus), H)
        step = mu
        candidate = hard_threshold(theta + 0.5 * step * grad, k)
        if config.monotone:
            cand_res = sign_residual(bits, H, taus, candidate)
            halvings = 0
            while cand_res > residual and halvings < 5:
                step *= 0.5
                halvings += 1
                candidate = hard_threshold(theta + 0.5 * step * grad, k)
                cand_res = sign_residual(bits, H, taus, candidate)
            if cand_res > residual:
                # no acceptable step; keep the current iterate
                break
            residual = cand_res
        else:
            residual = sign_residual(bits, H, taus, candidate)
        theta = candidate
        if residual == 0:
            converged = True
            break

    theta = apply_norm_mode(theta, config.norm_mode, config.oracle_norm)
    return SparseEstimate(theta, k, config.norm_mode, it, converged)


def hard_threshold_rows(thetas, k):
    """Row-wise :func:`hard_threshold` on a (trials, M) array."""
    if k >= thetas.shape[1]:
        return thetas.copy()
    drop = np.argsort(-np.abs(thetas), axis=1, kind="stable")[:, k:]
    out = thetas.copy()
    np.put_along_axis(out, drop, 0.0, axis=1)
    return out


def biht_batch(bits, H, taus, config, step_size=None):
    """BIHT applied independently to each row of a (trials, N) bit array.

    Produces the same iterates as :func:`biht` row by row (monotone guard
    not supported); rows stop updating once sign-consistent. Returns the
    (trials, M) estimates and the per-row iteration counts.
    """
    if config.monotone:
        raise ValueError("biht_batch does not implement the monotone guard")
    bits = np.atleast_2d(np.asarray(bits))
    H = np.asarray(H, dtype=float)
    if bits.shape[1] != H.shape[0]:
        raise ValueError(f"{bits.shape[1]} bits per row for a matrix with {H.shape[0]} rows")
    k = config.sparsity
    if k > H.shape[1]:
        raise ValueError(f"sparsity {k} exceeds dimension {H.shape[1]}")
    taus = np.broadcast_to(np.asarray(taus, dtype=float), (H.shape[0],))
    mu = step_size or config.step_size or spectral_step(H)
    s = 2.0 * bits - 1.0

    thetas = np.zeros((bits.shape[0], H.shape[1]))
    iterations = np.zeros(bits.shape[0], dtype=int)
    active = np.arange(bits.shape[0])
    proj = np.broadcast_to(-taus, (active.size, taus.size))
    for it in range(1, config.max_iterations + 1):
        grad = backproject(s[active] - np.sign(proj), H)
        cand = hard_threshold_rows(thetas[active] + 0.5 * mu * grad, k)
        thetas[active] = cand
        iterations[active] = it
        proj = project(cand, H) - taus
        done = np.all(s[active] == np.where(proj > 0, 1.0, -1.0), axis=1)
        if done.any():
            keep = ~done
            active = active[keep]
            proj = proj[keep]
            if active.size == 0:
                break
    norms = np.sqrt((thetas ** 2).sum(axis=1))
    mode = NormMode(config.norm_mode)
    nz = norms > 0
    if mode is NormMode.UNIT:
        thetas[nz] /= norms[nz, None]
    elif mode is NormMode.ORACLE:
        thetas[nz] *= (config.oracle_norm / norms[nz])[:, None]
    return thetas, iterations


def one_bit_log_likelihood(theta, bits, H, noise_std, taus):
    u = taus - H @ np.asarray(theta, dtype=float)
    b = np.asarray(bits, dtype=float)
    return float(np.sum(b * log_ccdf(u, noise_std) + (1.0 - b) * log_cdf(u, noise_std)))


def one_bit_gradient(theta, bits, H, noise_std, taus):
    u = taus - H @ np.asarray(theta, dtype=float)
    b = np.asarray(bits, dtype=float)
    log_p = log_pdf(u, noise_std)
    # p/F and p/(1-F) as exp of log differences: finite in both tails
    coeff = b * np.exp(log_p - log_ccdf(u, noise_std)) - (1.0 - b) * np.exp(log_p - log_cdf(u, noise_std))
    return H.T @ coeff


def one_bit_hessian(theta, bits, H, noise_std, taus):
    """Hessian of the one-bit log-likelihood (negative semidefinite)."""
    u = taus - H @ np.asarray(theta, dtype=float)
    b = np.asarray(bits, dtype=float)
    var = noise_std ** 2
    log_p = log_pdf(u, noise_std)
    r = np.exp(log_p - log_ccdf(u, noise_std))  # p / F
    q = np.exp(log_p - log_cdf(u, noise_std))  # p / (1 - F)
    curv = b * r * (r - u / var) + (1.0 - b) * q * (q + u / var)
    return -(H * curv[:, None]).T @ H


def one_bit_mle(bits, H, noise_std, taus=0.0, bound=1e3, max_iterations=200, gtol=1e-8):
    """Maximise the concave one-bit log-likelihood over the box |theta_i| <= bound.

    Damped Newton ascent from 0 with projection onto the box. ``converged``
    means the gradient norm fell below ``gtol`` in the interior. When the
    bits are perfectly separable the likelihood keeps rising along the
    separating direction; the iterate is then pushed to the box boundary and
    reported with ``at_bound=True`` and ``converged=False``.
    """
    bits = np.asarray(bits)
    H = np.asarray(H, dtype=float)
    if bits.size == 0:
        raise ValueError("empty bit vector")
    if bits.shape[0] != H.shape[0]:
        raise ValueError(f"{bits.shape[0]} bits for a matrix with {H.shape[0]} rows")
    noise_std = np.broadcast_to(np.asarray(noise_std, dtype=float), bits.shape)
    taus = np.broadcast_to(np.asarray(taus, dtype=float), bits.shape)
    m = H.shape[1]

    def L(t):
        return one_bit_log_likelihood(t, bits, H, noise_std, taus)

    theta = np.zeros(m)
    value = L(theta)
    converged = False
    it = 0
    for it in range(1, max_iterations + 1):
        grad = one_bit_gradient(theta, bits, H, noise_std, taus)
        if np.linalg.norm(grad) <= gtol:
            converged = True
            break
        neg_hess = -one_bit_hessian(theta, bits, H, noise_std, taus)
        ridge = 1e-12 * max(np.trace(neg_hess), 1e-300)
        try:
            direction = np.linalg.solve(neg_hess + ridge * np.eye(m), grad)
        except np.linalg.LinAlgError:
            direction = grad
        if not np.all(np.isfinite(direction)) or direction @ grad <= 0:
            direction = grad
        step = 1.0
        for _ in range(60):
            candidate = np.clip(theta + step * direction, -bound, bound)
            cand_value = L(candidate)
            if cand_value > value:
                break
            step *= 0.5
        else:
            break  # no ascent possible at working precision
        theta, value = candidate, cand_value

    if np.all(np.isfinite(theta)) and np.any(theta) and sign_residual(bits, H, taus, theta) == 0:
        pushed = theta * (bound / np.max(np.abs(theta)))
        if L(pushed) >= value:
            theta = pushed
    at_bound = bool(np.max(np.abs(theta)) >= bound * (1 - 1e-12))
    return SparseEstimate(theta, m, NormMode.RAW, it, converged and not at_bound, at_bound)


def clairvoyant_mle(x, H, noise_std):
    """Weighted least squares (H^T C^-1 H)^-1 H^T C^-1 x with C = diag(sigma^2)."""
    H = np.asarray(H, dtype=float)
    x = np.asarray(x, dtype=float)
    w = 1.0 / np.broadcast_to(np.asarray(noise_std, dtype=float), x.shape) ** 2
    n, m = H.shape
    normal = (H * w[:, None]).T @ H
    if n < m or np.linalg.matrix_rank(normal) < m:
        raise SingularFIMError(f"H^T C^-1 H is singular (N={n}, M={m})", condition=np.inf)
    return np.linalg.solve(normal, H.T @ (w * x))
