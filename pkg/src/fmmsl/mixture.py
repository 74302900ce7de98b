"""Finite mixtures of MSL components: density, log-likelihood, responsibilities."""
from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy.special import logsumexp

from .msl import MslParams, msl_logpdf


@dataclass(frozen=True)
class MixtureParams:
    weights: np.ndarray
    components: tuple[MslParams, ...]

    def __post_init__(self):
        w = np.atleast_1d(np.asarray(self.weights, dtype=float))
        comps = tuple(self.components)
        if len(comps) < 1:
            raise ValueError("a mixture needs at least one component")
        if w.shape != (len(comps),):
            raise ValueError(f"{w.shape[0]} weights for {len(comps)} components")
        if np.any(w < 0) or np.any(w > 1) or abs(w.sum() - 1.0) > 1e-12:
            raise ValueError(f"weights must lie on the simplex, got {w}")
        if len({c.p for c in comps}) != 1:
            raise ValueError("all components must share the same dimension")
        w.setflags(write=False)
        object.__setattr__(self, "weights", w)
        object.__setattr__(self, "components", comps)

    @property
    def g(self) -> int:
        return len(self.components)

    @property
    def p(self) -> int:
        return self.components[0].p

    def permuted(self, perm: Sequence[int]) -> "MixtureParams":
        """Components reordered so that new component k is old component ``perm[k]``."""
        perm = list(perm)
        return MixtureParams(self.weights[perm], tuple(self.components[i] for i in perm))

    @classmethod
    def from_arrays(cls, weights, mus, sigmas, gammas) -> "MixtureParams":
        w = np.asarray(weights, dtype=float)
        return cls(w / w.sum(), tuple(MslParams(m, s, c) for m, s, c in zip(mus, sigmas, gammas)))


def n_free_params(g: int, p: int) -> int:
    return (g - 1) + g * (2 * p + p * (p + 1) // 2)


def information_criteria(loglik: float, g: int, p: int, n: int) -> tuple[float, float]:
    """(AIC, BIC) with the free-parameter count of an unconstrained g-component model."""
    if n < 1:
        raise ValueError("n must be >= 1")
    d = n_free_params(g, p)
    return 2 * d - 2 * loglik, d * float(np.log(n)) - 2 * loglik


def component_logpdfs(data, theta: MixtureParams) -> np.ndarray:
    """(n, g) matrix of ``log pi_i + log f_i(y_j)``."""
    data = np.atleast_2d(np.asarray(data, dtype=float))
    with np.errstate(divide="ignore"):
        logw = np.log(theta.weights)
    return np.column_stack([lw + msl_logpdf(data, c) for lw, c in zip(logw, theta.components)])


def mixture_logpdf(y, theta: MixtureParams):
    y = np.asarray(y, dtype=float)
    out = logsumexp(component_logpdfs(y, theta), axis=1)
    return float(out[0]) if y.ndim == 1 else out


def loglik(data, theta: MixtureParams) -> float:
    return float(np.sum(mixture_logpdf(np.atleast_2d(data), theta)))


def responsibilities(y, theta: MixtureParams) -> np.ndarray:
    """Posterior component probabilities; a (g,) vector for one point, (n, g) for many."""
    y = np.asarray(y, dtype=float)
    terms = component_logpdfs(y, theta)
    z = np.exp(terms - logsumexp(terms, axis=1, keepdims=True))
    return z[0] if y.ndim == 1 else z


def classify(data, theta: MixtureParams) -> np.ndarray:
    """1-based MAP labels. ``argmax`` returns the first maximum, so ties go to the lower index."""
    z = responsibilities(np.atleast_2d(data), theta)
    return np.argmax(z, axis=1) + 1


def density_grid(theta: MixtureParams, lower, upper, grid: int) -> np.ndarray:
    """Rows of (x, y, density) over a grid x grid lattice spanning [lower, upper]; p = 2 only."""
    if theta.p != 2:
        raise ValueError(f"density grids need p = 2, got p = {theta.p}")
    if grid < 2:
        raise ValueError("grid must be >= 2")
    xs = np.linspace(lower[0], upper[0], grid)
    ys = np.linspace(lower[1], upper[1], grid)
    xx, yy = np.meshgrid(xs, ys, indexing="ij")
    pts = np.column_stack([xx.ravel(), yy.ravel()])
    return np.column_stack([pts, np.exp(mixture_logpdf(pts, theta))])


def vech_indices(p: int) -> tuple[np.ndarray, np.ndarray]:
    """Row/column indices of the column-stacked lower triangle (diagonal included)."""
    rows, cols = [], []
    for j in range(p):
        for i in range(j, p):
            rows.append(i)
            cols.append(j)
    return np.array(rows), np.array(cols)


def vech(a: np.ndarray) -> np.ndarray:
    r, c = vech_indices(a.shape[0])
    return a[r, c]


def unvech(v, p: int) -> np.ndarray:
    r, c = vech_indices(p)
    out = np.zeros((p, p))
    out[r, c] = v
    out[c, r] = v
    return out


def param_names(g: int, p: int) -> list[str]:
    """Names in the packed order: weights 1..g-1, then all locations, scatters, skewness vectors."""
    names = [f"pi_{i + 1}" for i in range(g - 1)]
    names += [f"mu_{i + 1}[{k + 1}]" for i in range(g) for k in range(p)]
    r, c = vech_indices(p)
    names += [f"sigma_{i + 1}[{a + 1}{b + 1}]" for i in range(g) for a, b in zip(r, c)]
    names += [f"gamma_{i + 1}[{k + 1}]" for i in range(g) for k in range(p)]
    return names


def pack(theta: MixtureParams) -> np.ndarray:
    parts = [theta.weights[:-1]]
    parts += [c.mu for c in theta.components]
    parts += [vech(c.sigma) for c in theta.components]
    parts += [c.gamma for c in theta.components]
    return np.concatenate(parts)


def unpack(vec, g: int, p: int) -> MixtureParams:
    """Inverse of :func:`pack`; the last weight is ``1 - sum(others)``."""
    vec = np.asarray(vec, dtype=float)
    q = p * (p + 1) // 2
    w = np.append(vec[:g - 1], 1.0 - np.sum(vec[:g - 1]))
    off = g - 1
    mus = vec[off:off + g * p].reshape(g, p)
    off += g * p
    sig = [unvech(vec[off + i * q: off + (i + 1) * q], p) for i in range(g)]
    off += g * q
    gams = vec[off:off + g * p].reshape(g, p)
    return MixtureParams(w, tuple(MslParams(m, s, c) for m, s, c in zip(mus, sig, gams)))
