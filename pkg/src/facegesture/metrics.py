"""Distance measures (city-block, Euclidean, weighted Euclidean, Mahalanobis)
and the shrunk covariance model behind the last two."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.linalg import cho_factor, cho_solve

DEFAULT_LAMBDA = 0.1
METRICS = ("cbd", "ed", "wed", "md")
# Below this per-dimension variance the shrinkage target falls back to I.
_TINY_VARIANCE = 1e-12


class SingularCovarianceError(ValueError):
    pass


class DegenerateVarianceError(ValueError):
    pass


class MetricDimensionError(ValueError):
    pass


def _pair(x, mu):
    x = np.asarray(x, dtype=np.float64)
    mu = np.asarray(mu, dtype=np.float64)
    if x.shape != mu.shape:
        raise MetricDimensionError(f"shape mismatch: {x.shape} vs {mu.shape}")
    return x, mu


def estimate_covariance(X, mu) -> np.ndarray:
    """Biased (1/N) outer-product covariance of rows of ``X`` about ``mu``."""
    X = np.atleast_2d(np.asarray(X, dtype=np.float64))
    mu = np.asarray(mu, dtype=np.float64)
    if X.shape[0] < 1:
        raise ValueError("need at least one sample")
    d = X - mu
    sigma = (d.T @ d) / X.shape[0]
    return 0.5 * (sigma + sigma.T)


def shrinkage_scale(sigma) -> float:
    """Variance level of the identity target: trace/k, or 1 for a null matrix."""
    sigma = np.asarray(sigma, dtype=np.float64)
    scale = float(np.trace(sigma)) / sigma.shape[0]
    return scale if scale > _TINY_VARIANCE else 1.0


def shrink(sigma, lam: float) -> np.ndarray:
    sigma = np.asarray(sigma, dtype=np.float64)
    k = sigma.shape[0]
    return (1.0 - lam) * sigma + lam * shrinkage_scale(sigma) * np.eye(k)


@dataclass(frozen=True, eq=False)
class CovarianceModel:
    """Covariance with identity-target shrinkage and a cached Cholesky factor."""

    sigma: np.ndarray
    shrinkage: float
    shrunk: np.ndarray
    factor: tuple

    @property
    def dim(self) -> int:
        return self.sigma.shape[0]

    def solve(self, delta) -> np.ndarray:
        return cho_solve(self.factor, delta)


def build_cov_model(sigma, lam: float = DEFAULT_LAMBDA) -> CovarianceModel:
    """Shrink ``sigma`` toward (trace/k) * I by ``lam`` and factor the result."""
    sigma = np.array(sigma, dtype=np.float64)
    if sigma.ndim != 2 or sigma.shape[0] != sigma.shape[1] or sigma.shape[0] < 1:
        raise MetricDimensionError("covariance must be a non-empty square matrix")
    if not 0.0 <= lam <= 1.0:
        raise ValueError(f"shrinkage must lie in [0, 1], got {lam}")
    if not np.all(np.isfinite(sigma)):
        raise ValueError("covariance has non-finite entries")
    if np.max(np.abs(sigma - sigma.T), initial=0.0) > 1e-12 * max(1.0, np.abs(sigma).max()):
        raise ValueError("covariance is not symmetric")
    if np.any(np.diag(sigma) < 0):
        raise ValueError("covariance has a negative variance")
    sigma = np.ascontiguousarray(0.5 * (sigma + sigma.T))
    shrunk = shrink(sigma, lam)
    try:
        factor = cho_factor(shrunk, lower=True, check_finite=False)
    except np.linalg.LinAlgError:
        raise SingularCovarianceError(
            f"shrunk covariance is not positive definite at lambda={lam}; use a larger lambda"
        ) from None
    diag = np.abs(np.diag(factor[0]))
    if diag.min() <= np.sqrt(np.finfo(float).eps) * 1e-4 * diag.max():
        raise SingularCovarianceError(
            f"shrunk covariance is numerically singular at lambda={lam}; use a larger lambda"
        )
    for arr in (sigma, shrunk):
        arr.setflags(write=False)
    return CovarianceModel(sigma, float(lam), shrunk, factor)


def mahalanobis(x, mu, cov: CovarianceModel) -> float:
    """sqrt(d^T S^-1 d) with d = x - mu, via a Cholesky solve."""
    x, mu = _pair(x, mu)
    if x.shape[-1] != cov.dim:
        raise MetricDimensionError(f"expected length {cov.dim}, got {x.shape[-1]}")
    delta = x - mu
    q = float(delta @ cov.solve(delta))
    return float(np.sqrt(max(q, 0.0)))


def euclidean(x, mu) -> float:
    x, mu = _pair(x, mu)
    d = x - mu
    return float(np.sqrt(d @ d))


def cityblock(x, mu) -> float:
    x, mu = _pair(x, mu)
    return float(np.sum(np.abs(x - mu)))


def shrunk_variances(var_diag, lam: float = 0.0) -> np.ndarray:
    """Per-feature variances shrunk like the full matrix: (1-lam)*s_ii + lam*mean(s)."""
    v = np.asarray(var_diag, dtype=np.float64)
    mean = float(v.mean())
    target = mean if mean > _TINY_VARIANCE else 1.0
    out = (1.0 - lam) * v + lam * target
    if np.any(out < 1e-12):
        raise DegenerateVarianceError("shrunk variance below 1e-12; use a larger lambda")
    return out


def weighted_euclidean(x, mu, var_diag, lam: float = 0.0) -> float:
    x, mu = _pair(x, mu)
    w = shrunk_variances(var_diag, lam)
    if w.shape != x.shape:
        raise MetricDimensionError(f"variance length {w.size} != {x.size}")
    d = x - mu
    return float(np.sqrt(np.sum(d * d / w)))


def distance(metric: str, x, mu, cov: CovarianceModel | None = None) -> float:
    """Dispatch by metric name; ``wed``/``md`` need ``cov``."""
    if metric == "cbd":
        return cityblock(x, mu)
    if metric == "ed":
        return euclidean(x, mu)
    if metric == "wed":
        return weighted_euclidean(x, mu, np.diag(cov.sigma), cov.shrinkage)
    if metric == "md":
        return mahalanobis(x, mu, cov)
    raise ValueError(f"unknown metric {metric!r}; expected one of {METRICS}")
