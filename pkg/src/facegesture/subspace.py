"""PCA face space: snapshot (Gram matrix) and direct fits, projection."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import jacobi_eigh

DEFAULT_FRACTION = 0.95
# Eigenvalues below this fraction of the largest are treated as zero.
_RANK_RTOL = 1e-10
_DIRECT_MAX_DIM = 64


class InsufficientDataError(ValueError):
    pass


class DegenerateDataError(ValueError):
    pass


class SubspaceDimensionError(ValueError):
    pass


@dataclass(frozen=True)
class Subspace:
    """Mean, orthonormal basis rows and eigenvalues of a fitted PCA.

    ``basis`` has shape ``(k, dim)``; ``eigenvalues`` are nonincreasing.
    """

    mean: np.ndarray
    basis: np.ndarray
    eigenvalues: np.ndarray

    def __post_init__(self):
        mean = np.array(self.mean, dtype=np.float64).ravel()
        # fixed C layout keeps BLAS results reproducible across save/load
        basis = np.array(self.basis, dtype=np.float64, order="C")
        if basis.ndim == 1:
            basis = basis.reshape(1, -1)
        eig = np.array(self.eigenvalues, dtype=np.float64).ravel()
        if basis.shape[1] != mean.size:
            raise SubspaceDimensionError(f"basis width {basis.shape[1]} != mean length {mean.size}")
        if basis.shape[0] != eig.size or eig.size < 1:
            raise SubspaceDimensionError("need one eigenvalue per basis row, k >= 1")
        for arr in (mean, basis, eig):
            arr.setflags(write=False)
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "basis", basis)
        object.__setattr__(self, "eigenvalues", eig)

    @property
    def dim(self) -> int:
        return self.mean.size

    @property
    def k(self) -> int:
        return self.basis.shape[0]


def choose_k(eigenvalues, fraction: float) -> int:
    """Smallest k whose leading eigenvalues carry at least ``fraction`` of the total."""
    if not 0.0 < fraction <= 1.0:
        raise ValueError(f"fraction must be in (0, 1], got {fraction}")
    lam = np.asarray(eigenvalues, dtype=np.float64)
    total = lam.sum()
    if lam.size == 0 or total <= 0.0:
        raise DegenerateDataError("eigenvalue spectrum is all zero")
    cum = np.cumsum(lam) / total
    if fraction >= 1.0:
        return int(np.count_nonzero(lam > 0.0))
    # guard against cumsum landing a hair under an exact fraction
    return int(min(np.searchsorted(cum, fraction - 1e-15, side="left") + 1, lam.size))


def _apply_sign_convention(basis: np.ndarray) -> np.ndarray:
    idx = np.argmax(np.abs(basis), axis=1)
    signs = np.sign(basis[np.arange(basis.shape[0]), idx])
    signs[signs == 0] = 1.0
    return basis * signs[:, None]


def _clean_spectrum(lam: np.ndarray) -> np.ndarray:
    lam = lam.copy()
    top = lam.max(initial=0.0)
    lam[lam < max(top * _RANK_RTOL, 0.0)] = 0.0
    return lam


def _prepare(X):
    X = np.asarray(X, dtype=np.float64)
    if X.ndim != 2:
        raise ValueError("data matrix must be 2D (N x D)")
    n = X.shape[0]
    if n < 2:
        raise InsufficientDataError(f"need at least 2 samples, got {n}")
    if X.shape[1] < 1:
        raise ValueError("feature dimension must be >= 1")
    mean = X.mean(axis=0)
    return X, mean, X - mean


def _retain(lam: np.ndarray, n: int, k, fraction) -> int:
    rank = int(np.count_nonzero(lam > 0.0))
    if rank == 0:
        raise DegenerateDataError("all samples are identical")
    if k is not None:
        if not 1 <= k <= n - 1:
            raise ValueError(f"k must satisfy 1 <= k <= N-1 = {n - 1}, got {k}")
        if k > rank:
            raise DegenerateDataError(f"k={k} exceeds data rank {rank}")
        return int(k)
    return choose_k(lam[:rank], DEFAULT_FRACTION if fraction is None else fraction)


def fit_pca_snapshot(X, k: int | None = None, fraction: float | None = None) -> Subspace:
    """PCA through the N x N Gram matrix, for N much smaller than D.

    Give either ``k`` or a variance ``fraction``; with neither, 0.95 is used.
    """
    if k is not None and fraction is not None:
        raise ValueError("give k or fraction, not both")
    X, mean, Xc = _prepare(X)
    n = X.shape[0]
    gram = (Xc @ Xc.T) / n
    lam, vecs = np.linalg.eigh(gram)
    order = np.argsort(-lam, kind="stable")
    lam = _clean_spectrum(lam[order])
    vecs = vecs[:, order]
    keep = _retain(lam, n, k, fraction)

    basis = (Xc.T @ vecs[:, :keep]).T
    basis /= np.linalg.norm(basis, axis=1, keepdims=True)
    # one Gram-Schmidt pass tightens orthogonality lost in the lift
    basis, _ = _orthonormalize(basis)
    return Subspace(mean, _apply_sign_convention(basis), lam[:keep])


def _orthonormalize(rows: np.ndarray):
    q, r = np.linalg.qr(rows.T)
    # keep each vector's orientation
    q = q * np.sign(np.diag(r))
    return q.T, r


def fit_pca_direct(X, k: int | None = None, fraction: float | None = None) -> Subspace:
    """PCA from the D x D covariance with the Jacobi solver (small D only)."""
    if k is not None and fraction is not None:
        raise ValueError("give k or fraction, not both")
    X, mean, Xc = _prepare(X)
    n, d = X.shape
    if d > _DIRECT_MAX_DIM:
        raise ValueError(f"direct PCA limited to D <= {_DIRECT_MAX_DIM}, got {d}")
    cov = (Xc.T @ Xc) / n
    lam, vecs = jacobi_eigh(cov)
    lam = _clean_spectrum(lam)
    keep = _retain(lam, n, k, fraction)
    basis = vecs[:, :keep].T
    return Subspace(mean, _apply_sign_convention(basis), lam[:keep])


def project(s: Subspace, x) -> np.ndarray:
    """Coordinates of ``x`` (one vector or rows of a matrix) in the face space."""
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != s.dim:
        raise SubspaceDimensionError(f"expected length {s.dim}, got {x.shape[-1]}")
    return (x - s.mean) @ s.basis.T


def reconstruct(s: Subspace, coords) -> np.ndarray:
    coords = np.asarray(coords, dtype=np.float64)
    if coords.shape[-1] != s.k:
        raise SubspaceDimensionError(f"expected {s.k} coordinates, got {coords.shape[-1]}")
    return s.mean + coords @ s.basis
