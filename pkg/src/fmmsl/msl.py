"""Multivariate skew Laplace (MSL) distribution.

Density, moments, characteristic function, conditional moments of the
latent mixing variable, and sampling through the normal variance-mean
mixture ``Y = mu + gamma / V + sqrt(1 / V) * Sigma^{1/2} X`` with
``1 / V ~ chi2(p + 1)``, i.e. V inverse gamma((p + 1) / 2, 1 / 2).
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg
from scipy.special import gammaln

EPS_D = 1e-10


class NotPositiveDefiniteError(ValueError):
    pass


def cholesky(sigma: np.ndarray) -> np.ndarray:
    """Lower Cholesky factor, raising ``NotPositiveDefiniteError`` on failure."""
    try:
        return linalg.cholesky(sigma, lower=True)
    except linalg.LinAlgError as exc:
        raise NotPositiveDefiniteError(f"scatter matrix is not positive definite: {exc}") from exc


@dataclass(frozen=True)
class MslParams:
    mu: np.ndarray
    sigma: np.ndarray
    gamma: np.ndarray

    def __post_init__(self):
        mu = np.atleast_1d(np.asarray(self.mu, dtype=float))
        sigma = np.atleast_2d(np.asarray(self.sigma, dtype=float))
        gamma = np.atleast_1d(np.asarray(self.gamma, dtype=float))
        p = mu.shape[0]
        if mu.ndim != 1 or gamma.shape != (p,) or sigma.shape != (p, p):
            raise ValueError(
                f"dimension mismatch: mu {mu.shape}, sigma {sigma.shape}, gamma {gamma.shape}")
        if not (np.all(np.isfinite(mu)) and np.all(np.isfinite(sigma)) and np.all(np.isfinite(gamma))):
            raise ValueError("parameters must be finite")
        scale = max(np.max(np.abs(sigma)), 1.0)
        if np.max(np.abs(sigma - sigma.T)) > 1e-12 * scale:
            raise ValueError("sigma is not symmetric")
        chol = cholesky(sigma)
        for name, arr in (("mu", mu), ("sigma", sigma), ("gamma", gamma)):
            arr.setflags(write=False)
            object.__setattr__(self, name, arr)
        chol.setflags(write=False)
        object.__setattr__(self, "_chol", chol)

    @property
    def p(self) -> int:
        return self.mu.shape[0]

    @property
    def chol(self) -> np.ndarray:
        return self._chol

    @property
    def logdet(self) -> float:
        return 2.0 * float(np.sum(np.log(np.diag(self._chol))))

    @property
    def alpha(self) -> float:
        w = linalg.solve_triangular(self._chol, self.gamma, lower=True)
        return float(np.sqrt(1.0 + w @ w))

    def whiten(self, y: np.ndarray) -> np.ndarray:
        """Return ``L^{-1} (y - mu)`` row-wise for an (n, p) array."""
        y = np.atleast_2d(y)
        if y.shape[-1] != self.p:
            raise ValueError(f"dimension mismatch: data has {y.shape[-1]} columns, params have p={self.p}")
        return linalg.solve_triangular(self._chol, (y - self.mu).T, lower=True).T


@dataclass(frozen=True)
class VMoments:
    e_v: float | np.ndarray
    e_vinv: float | np.ndarray


def _maha_terms(y, params: MslParams):
    z = params.whiten(y)
    w = linalg.solve_triangular(params.chol, params.gamma, lower=True)
    return np.einsum("ij,ij->i", z, z), z @ w, float(np.sqrt(1.0 + w @ w))


def log_normalizer(params: MslParams) -> float:
    p = params.p
    return (-0.5 * params.logdet - p * np.log(2.0) - 0.5 * (p - 1) * np.log(np.pi)
            - np.log(params.alpha) - gammaln(0.5 * (p + 1)))


def msl_logpdf(y, params: MslParams):
    """Log-density at ``y`` (a p-vector or an (n, p) array).

    Returns a float for a single point and an (n,) array otherwise.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    if single and y.shape[0] != params.p:
        raise ValueError(f"dimension mismatch: y has length {y.shape[0]}, params have p={params.p}")
    d, skew, alpha = _maha_terms(y, params)
    out = log_normalizer(params) - alpha * np.sqrt(d) + skew
    return float(out[0]) if single else out


def msl_moments(params: MslParams) -> tuple[np.ndarray, np.ndarray]:
    p = params.p
    mean = params.mu + (p + 1) * params.gamma
    cov = (p + 1) * (params.sigma + 2.0 * np.outer(params.gamma, params.gamma))
    return mean, cov


def msl_cf(t, params: MslParams) -> complex:
    t = np.asarray(t, dtype=float)
    p = params.p
    base = 1.0 + t @ params.sigma @ t - 2j * (t @ params.gamma)
    return complex(np.exp(1j * (t @ params.mu)) * base ** (-(p + 1) / 2.0))


def v_conditional_moments(y, params: MslParams, eps_d: float = EPS_D) -> VMoments:
    """E(V | y) and E(1/V | y) from the generalized inverse Gaussian posterior of V.

    The squared Mahalanobis distance is clamped below at ``eps_d``.
    """
    y = np.asarray(y, dtype=float)
    single = y.ndim == 1
    d, _, alpha = _maha_terms(y, params)
    root = np.sqrt(np.maximum(d, eps_d))
    e_v = alpha / root
    e_vinv = (1.0 + alpha * root) / alpha ** 2
    if single:
        return VMoments(float(e_v[0]), float(e_vinv[0]))
    return VMoments(e_v, e_vinv)


def msl_sample(params: MslParams, n: int, seed) -> np.ndarray:
    if n < 1:
        raise ValueError("n must be >= 1")
    rng = np.random.default_rng(seed)
    p = params.p
    w = rng.chisquare(p + 1, size=n)  # 1/V, with V the inverse-gamma mixing variable
    x = rng.standard_normal((n, p))
    return params.mu + w[:, None] * params.gamma + np.sqrt(w)[:, None] * (x @ params.chol.T)
