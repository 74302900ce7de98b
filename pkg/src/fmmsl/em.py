"""EM fitting of FM-MSL models: E-step, M-step, k-means start, restarts."""
from __future__ import annotations

import logging
from dataclasses import dataclass, field

import numpy as np
from scipy import linalg
from scipy.special import logsumexp

from .mixture import MixtureParams, classify, information_criteria, pack
from .msl import EPS_D, MslParams, log_normalizer

log = logging.getLogger(__name__)

STOP_RULES = ("param-norm", "abs-loglik", "rel-loglik")
M_STEP_VARIANTS = ("joint", "printed")


class FitError(RuntimeError):
    """Base class for fitting failures."""

    causes: tuple = ()


class DegenerateComponentError(FitError):
    pass


class EmptyClusterError(FitError):
    pass


class NonFiniteLikelihoodError(FitError):
    def __init__(self, iteration: int, value: float):
        super().__init__(f"log-likelihood became {value} at iteration {iteration}")
        self.iteration = iteration


@dataclass
class EmConfig:
    g: int = 2
    tol: float = 1e-6
    max_iter: int = 2000
    stop_rule: str = "rel-loglik"
    restarts: int = 10
    seed: int = 0
    eps_d: float = EPS_D
    min_mass: float | None = None  # None means p + 1
    m_step: str = "joint"

    def __post_init__(self):
        if self.g < 1:
            raise ValueError("g must be >= 1")
        if not self.tol > 0:
            raise ValueError("tol must be > 0")
        if self.max_iter < 1:
            raise ValueError("max_iter must be >= 1")
        if self.restarts < 1:
            raise ValueError("restarts must be >= 1")
        if self.stop_rule not in STOP_RULES:
            raise ValueError(f"stop_rule must be one of {STOP_RULES}, got {self.stop_rule!r}")
        if self.m_step not in M_STEP_VARIANTS:
            raise ValueError(f"m_step must be one of {M_STEP_VARIANTS}, got {self.m_step!r}")


@dataclass
class EStepCache:
    z: np.ndarray
    v1: np.ndarray
    v2: np.ndarray
    loglik: float


@dataclass
class FitResult:
    theta: MixtureParams
    loglik_trace: list[float]
    iterations: int
    converged: bool
    z_final: np.ndarray
    labels: np.ndarray
    aic: float
    bic: float
    n: int
    se: dict | None = None
    restart: int = 0
    failed_restarts: list[str] = field(default_factory=list)

    @property
    def loglik(self) -> float:
        return self.loglik_trace[-1]


def e_step(data, theta: MixtureParams, eps_d: float = EPS_D) -> EStepCache:
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, g = data.shape[0], theta.g
    terms = np.empty((n, g))
    v1 = np.empty((n, g))
    v2 = np.empty((n, g))
    with np.errstate(divide="ignore"):
        logw = np.log(theta.weights)
    for i, c in enumerate(theta.components):
        zc = c.whiten(data)
        wg = linalg.solve_triangular(c.chol, c.gamma, lower=True)
        alpha = np.sqrt(1.0 + wg @ wg)
        d = np.einsum("ij,ij->i", zc, zc)
        terms[:, i] = logw[i] + log_normalizer(c) - alpha * np.sqrt(d) + zc @ wg
        root = np.sqrt(np.maximum(d, eps_d))
        v1[:, i] = alpha / root
        v2[:, i] = (1.0 + alpha * root) / alpha ** 2
    norm = logsumexp(terms, axis=1, keepdims=True)
    z = np.exp(terms - norm)
    return EStepCache(z, v1, v2, float(np.sum(norm)))


def repair_scatter(s: np.ndarray) -> np.ndarray:
    """Symmetrize and lift the smallest eigenvalue to ``1e-10 * trace / p`` if needed."""
    s = 0.5 * (s + s.T)
    p = s.shape[0]
    floor = 1e-10 * np.trace(s) / p
    if not np.isfinite(floor) or floor <= 0:
        raise DegenerateComponentError("scatter update has non-positive trace")
    lo = np.linalg.eigvalsh(s)[0]
    if lo <= floor:
        s = s + (floor - lo) * np.eye(p)
    return s


def m_step(data, cache: EStepCache, theta_old: MixtureParams,
           min_mass: float | None = None, variant: str = "joint") -> MixtureParams:
    """One M-step using the closed-form updates.

    With ``variant="joint"`` the skewness update is computed first and the
    location and scatter updates use the new values; the stationarity
    equations for (mu, gamma) do not involve the scatter, so this is the
    exact maximizer of the expected complete-data log-likelihood.
    ``variant="printed"`` plugs the previous skewness into the location
    update and the previous location and skewness into the scatter update;
    it is not guaranteed to increase the likelihood and can produce
    indefinite scatter updates.
    """
    if variant not in M_STEP_VARIANTS:
        raise ValueError(f"variant must be one of {M_STEP_VARIANTS}")
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, p = data.shape
    min_mass = p + 1 if min_mass is None else min_mass
    z, v1, v2 = cache.z, cache.v1, cache.v2
    mass = z.sum(axis=0)
    comps = []
    for i, old in enumerate(theta_old.components):
        if mass[i] < min_mass:
            raise DegenerateComponentError(
                f"component {i + 1} responsibility mass {mass[i]:.3g} below {min_mass}")
        zi = z[:, i]
        zv1 = zi * v1[:, i]
        s_z, s_zv1, s_zv2 = mass[i], zv1.sum(), (zi * v2[:, i]).sum()
        s_zy = zi @ data
        s_zv1y = zv1 @ data
        gamma = (s_zv1 * s_zy - s_z * s_zv1y) / (s_zv1 * s_zv2 - s_z ** 2)
        if variant == "joint":
            mu = (s_zv1y - s_z * gamma) / s_zv1
            mu_s, gamma_s = mu, gamma
        else:
            mu = (s_zv1y - s_z * old.gamma) / s_zv1
            mu_s, gamma_s = old.mu, old.gamma
        r = data - mu_s
        sigma = ((zv1[:, None] * r).T @ r - np.outer(gamma_s, gamma_s) * s_zv2) / s_z
        comps.append(MslParams(mu, repair_scatter(sigma), gamma))
    return MixtureParams(mass / mass.sum(), tuple(comps))


def kmeans(data, g: int, rng: np.random.Generator, max_iter: int = 50) -> np.ndarray:
    """Lloyd's algorithm with k-means++ seeding; returns 0-based labels."""
    n = data.shape[0]
    centers = [data[rng.integers(n)]]
    for _ in range(1, g):
        d2 = np.min(((data[:, None, :] - np.array(centers)[None]) ** 2).sum(-1), axis=1)
        if d2.sum() <= 0:
            raise EmptyClusterError("fewer distinct points than clusters")
        centers.append(data[rng.choice(n, p=d2 / d2.sum())])
    centers = np.array(centers)
    labels = None
    for _ in range(max_iter):
        dist = ((data[:, None, :] - centers[None]) ** 2).sum(-1)
        new = np.argmin(dist, axis=1)
        if labels is not None and np.array_equal(new, labels):
            break
        labels = new
        for k in range(g):
            members = data[labels == k]
            if len(members) == 0:
                raise EmptyClusterError(f"cluster {k + 1} is empty")
            centers[k] = members.mean(axis=0)
    return labels


def _skewness(x: np.ndarray) -> np.ndarray:
    dev = x - x.mean(axis=0)
    m2 = (dev ** 2).mean(axis=0)
    m3 = (dev ** 3).mean(axis=0)
    with np.errstate(divide="ignore", invalid="ignore"):
        out = m3 / m2 ** 1.5
    return np.where(m2 > 0, out, 0.0)


def init_kmeans(data, g: int, seed) -> MixtureParams:
    """Starting values from a hard k-means partition.

    Weights are cluster proportions, locations cluster means, scatters the
    within-cluster second moments and skewness vectors the per-coordinate
    sample skewness coefficients.
    """
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, p = data.shape
    if n < g * (p + 1):
        raise ValueError(f"need at least g*(p+1) = {g * (p + 1)} observations, got {n}")
    labels = kmeans(data, g, np.random.default_rng(seed))
    weights, comps = [], []
    for k in range(g):
        x = data[labels == k]
        mu = x.mean(axis=0)
        dev = x - mu
        comps.append(MslParams(mu, repair_scatter(dev.T @ dev / len(x)), _skewness(x)))
        weights.append(len(x) / n)
    return MixtureParams(np.array(weights), tuple(comps))


def _stop(rule: str, tol: float, ll_old, ll_new, th_old, th_new) -> bool:
    if rule == "abs-loglik":
        return abs(ll_new - ll_old) < tol
    if rule == "rel-loglik":
        return abs(ll_new / ll_old - 1.0) < tol
    return float(np.linalg.norm(pack(th_new) - pack(th_old))) < tol


def run_em(data, theta0: MixtureParams, config: EmConfig) -> FitResult:
    """Iterate E and M steps from ``theta0`` until the stopping rule fires."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, p = data.shape
    theta = theta0
    cache = e_step(data, theta, config.eps_d)
    if not np.isfinite(cache.loglik):
        raise NonFiniteLikelihoodError(0, cache.loglik)
    trace = [cache.loglik]
    converged = False
    it = 0
    while it < config.max_iter:
        it += 1
        new = m_step(data, cache, theta, config.min_mass, config.m_step)
        new_cache = e_step(data, new, config.eps_d)
        if not np.isfinite(new_cache.loglik):
            raise NonFiniteLikelihoodError(it, new_cache.loglik)
        done = _stop(config.stop_rule, config.tol, trace[-1], new_cache.loglik, theta, new)
        theta, cache = new, new_cache
        trace.append(cache.loglik)
        if done:
            converged = True
            break
    aic, bic = information_criteria(trace[-1], theta.g, p, n)
    return FitResult(theta=theta, loglik_trace=trace, iterations=it, converged=converged,
                     z_final=cache.z, labels=classify(data, theta), aic=aic, bic=bic, n=n)


def restart_seed(seed: int, index: int) -> int:
    return int(np.random.SeedSequence([seed, index]).generate_state(1)[0])


def fit(data, config: EmConfig) -> FitResult:
    """Fit from ``config.restarts`` k-means starts and keep the best final log-likelihood."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    n, p = data.shape
    if not np.all(np.isfinite(data)):
        raise ValueError("data contain non-finite values")
    if n <= config.g * (p + 1):
        raise ValueError(f"n={n} too small for g={config.g} components in dimension {p}")
    best = None
    failures, causes = [], []
    for r in range(config.restarts):
        try:
            theta0 = init_kmeans(data, config.g, restart_seed(config.seed, r))
            res = run_em(data, theta0, config)
        except (FitError, ValueError) as exc:
            log.debug("restart %d failed: %s", r, exc)
            failures.append(f"restart {r}: {exc}")
            causes.append(exc)
            continue
        res.restart = r
        if best is None or res.loglik > best.loglik or (
                res.loglik == best.loglik and res.iterations < best.iterations):
            best = res
    if best is None:
        err = FitError("all restarts failed: " + "; ".join(failures))
        err.causes = tuple(causes)
        raise err
    best.failed_restarts = failures
    return best
