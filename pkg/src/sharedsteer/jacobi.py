"""Cyclic Jacobi eigenvalue iteration for small dense symmetric matrices."""

from __future__ import annotations

import numpy as np


def jacobi_eigenvalues(M, tol: float = 1e-12, max_sweeps: int = 100) -> np.ndarray:
    """All eigenvalues of a symmetric matrix, ascending.

    Rotations are applied in cyclic row order until the off-diagonal
    Frobenius norm drops below ``tol`` times the matrix norm (absolute
    ``tol`` for a zero matrix). The input is symmetrized first.
    """
    A = np.array(M, dtype=float, copy=True)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError("square matrix expected")
    A = 0.5 * (A + A.T)
    n = A.shape[0]
    if n == 1:
        return A[0].copy()
    scale = max(np.linalg.norm(A), 1.0)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(A * A) - np.sum(np.diag(A) ** 2), 0.0))
        if off < tol * scale:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = A[p, q]
                if abs(apq) < 1e-300:
                    continue
                theta = (A[q, q] - A[p, p]) / (2.0 * apq)
                if theta == 0:
                    t = 1.0
                elif abs(theta) > 1e150:
                    t = 0.5 / theta
                else:
                    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                ap = A[:, p].copy()
                aq = A[:, q].copy()
                A[:, p] = c * ap - s * aq
                A[:, q] = s * ap + c * aq
                rp = A[p, :].copy()
                rq = A[q, :].copy()
                A[p, :] = c * rp - s * rq
                A[q, :] = s * rp + c * rq
                A[p, q] = A[q, p] = 0.0
    return np.sort(np.diag(A))


def min_eigenvalue(M) -> float:
    return float(jacobi_eigenvalues(M)[0])
