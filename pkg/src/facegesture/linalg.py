"""Cyclic Jacobi eigensolver for small symmetric matrices."""

from __future__ import annotations

import math

import numpy as np


class ConvergenceError(RuntimeError):
    pass


def jacobi_eigh(a, tol: float = 1e-12, max_sweeps: int = 100):
    """Eigen-decompose a real symmetric matrix by cyclic Jacobi rotations.

    Sweeps until the off-diagonal Frobenius norm is at most ``tol * ||A||_F``.

    Returns
    -------
    eigenvalues : (n,) array, descending
    eigenvectors : (n, n) array, column ``i`` pairs with ``eigenvalues[i]``
    """
    a = np.array(a, dtype=np.float64)
    n = a.shape[0]
    if a.ndim != 2 or a.shape[1] != n:
        raise ValueError("expected a square matrix")
    a = 0.5 * (a + a.T)
    v = np.eye(n)
    target = tol * np.linalg.norm(a)

    for _ in range(max_sweeps):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= target:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if apq == 0.0:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = math.copysign(1.0, theta) / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # A <- J^T A J with J the (p, q) plane rotation
                ap = a[:, p].copy()
                aq = a[:, q].copy()
                a[:, p] = c * ap - s * aq
                a[:, q] = s * ap + c * aq
                ap = a[p, :].copy()
                aq = a[q, :].copy()
                a[p, :] = c * ap - s * aq
                a[q, :] = s * ap + c * aq
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - s * vq
                v[:, q] = s * vp + c * vq
    else:
        raise ConvergenceError(f"Jacobi did not converge in {max_sweeps} sweeps")

    w = np.diag(a).copy()
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]
