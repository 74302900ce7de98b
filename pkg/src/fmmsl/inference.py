"""Standard errors from the empirical (outer-product) information matrix."""
from __future__ import annotations

import numpy as np
from scipy import linalg

from .em import EStepCache, e_step
from .mixture import MixtureParams, information_criteria, n_free_params, param_names, vech  # noqa: F401
from .msl import EPS_D

RCOND_MIN = 1e-12


class SingularInformationError(ArithmeticError):
    def __init__(self, rcond: float):
        super().__init__(f"information matrix is numerically singular (reciprocal condition {rcond:.3g})")
        self.rcond = rcond


def score_matrix(data, theta: MixtureParams, eps_d: float = EPS_D,
                 cache: EStepCache | None = None) -> np.ndarray:
    """Per-observation scores, one row per observation, in :func:`~fmmsl.mixture.pack` order.

    Each row is the conditional expectation of the complete-data score given
    the observation, which equals the gradient of the observed log-density.
    The scatter block differentiates with respect to the distinct entries of
    the symmetric matrix, so off-diagonal entries pick up both triangles.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, p = data.shape
    g = theta.g
    if cache is None:
        cache = e_step(data, theta, eps_d)
    z, v1, v2 = cache.z, cache.v1, cache.v2
    w = theta.weights
    s_pi = z[:, :g - 1] / w[:g - 1] - (z[:, g - 1] / w[g - 1])[:, None]
    s_mu, s_sig, s_gam = [], [], []
    half = np.where(np.eye(p, dtype=bool), 0.5, 1.0)
    for i, c in enumerate(theta.components):
        sinv_r = linalg.cho_solve((c.chol, True), (data - c.mu).T).T  # rows: Sigma^{-1}(y - mu)
        sinv_g = linalg.cho_solve((c.chol, True), c.gamma)
        sinv = linalg.cho_solve((c.chol, True), np.eye(p))
        zi = z[:, i][:, None]
        s_mu.append(zi * (v1[:, i][:, None] * sinv_r - sinv_g))
        s_gam.append(zi * (sinv_r - v2[:, i][:, None] * sinv_g))
        cross = sinv_r[:, :, None] * sinv_g[None, None, :]
        m = (-sinv[None]
             + v1[:, i][:, None, None] * sinv_r[:, :, None] * sinv_r[:, None, :]
             - cross - cross.transpose(0, 2, 1)
             + v2[:, i][:, None, None] * np.outer(sinv_g, sinv_g)[None])
        m = m * half[None]
        s_sig.append(z[:, i][:, None] * np.array([vech(mj) for mj in m]))
    return np.hstack([s_pi] + s_mu + s_sig + s_gam)


def score_vector(y, theta: MixtureParams, eps_d: float = EPS_D) -> np.ndarray:
    return score_matrix(np.atleast_2d(y), theta, eps_d)[0]


def empirical_info(data, theta: MixtureParams, eps_d: float = EPS_D) -> np.ndarray:
    s = score_matrix(data, theta, eps_d)
    info = s.T @ s
    return 0.5 * (info + info.T)


def reciprocal_condition(info: np.ndarray) -> float:
    ev = np.linalg.eigvalsh(info)
    if ev[-1] <= 0:
        return 0.0
    return max(ev[0], 0.0) / ev[-1]


def standard_errors(info: np.ndarray) -> np.ndarray:
    """Square roots of the diagonal of ``info^{-1}``.

    Raises :class:`SingularInformationError` when the reciprocal condition
    number is below 1e-12 instead of falling back to a pseudo-inverse.
    """
    info = np.atleast_2d(np.asarray(info, dtype=float))
    rcond = reciprocal_condition(info)
    if rcond < RCOND_MIN:
        raise SingularInformationError(rcond)
    try:
        factor = linalg.cho_factor(info, lower=True)
    except linalg.LinAlgError as exc:
        raise SingularInformationError(rcond) from exc
    cov = linalg.cho_solve(factor, np.eye(info.shape[0]))
    return np.sqrt(np.diag(cov))


def named_standard_errors(data, theta: MixtureParams, eps_d: float = EPS_D) -> dict:
    """Standard errors keyed by parameter name, plus the condition estimate."""
    data = np.atleast_2d(data)
    info = empirical_info(data, theta, eps_d)
    se = standard_errors(info)
    names = param_names(theta.g, theta.p)
    assert len(names) == n_free_params(theta.g, theta.p) == len(se)
    return {"names": names, "values": se.tolist(), "rcond": reciprocal_condition(info)}
