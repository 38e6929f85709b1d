"""Symmetric eigensolver: cyclic Jacobi rotations.

Deterministic across runs and platforms that share an IEEE-754 double
implementation, which keeps trained models reproducible.  Convergence is
declared when the off-diagonal Frobenius norm drops below 1e-10 relative
to the matrix norm; a 100-sweep cap guards pathological inputs.
"""

from __future__ import annotations

import numpy as np

OFF_DIAGONAL_TOL = 1e-10
MAX_SWEEPS = 100


def _off_diagonal_norm(a: np.ndarray) -> float:
    return float(np.sqrt(np.sum(np.square(a - np.diag(np.diag(a))))))


def jacobi_eigh(matrix: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (non-increasing) and matching orthonormal eigenvectors.

    Returns ``(values, vectors)`` with eigenvectors as columns.  Each
    column's sign is fixed so its largest-magnitude entry is positive.
    """
    a = np.array(matrix, dtype=float, copy=True)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError("square matrix required")
    m = a.shape[0]
    v = np.eye(m)
    scale = float(np.sqrt(np.sum(np.square(a))))
    if scale == 0.0:
        return np.zeros(m), v
    threshold = OFF_DIAGONAL_TOL * scale

    for _ in range(MAX_SWEEPS):
        if _off_diagonal_norm(a) <= threshold:
            break
        for p in range(m - 1):
            for q in range(p + 1, m):
                apq = a[p, q]
                if abs(apq) <= 1e-300:
                    continue
                diff = a[q, q] - a[p, p]
                if abs(apq) < 1e-36 * abs(diff):
                    t = apq / diff
                else:
                    theta = diff / (2.0 * apq)
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0.0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                # Two-sided rotation in the (p, q) plane.
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - s * col_q
                a[:, q] = s * col_p + c * col_q
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - s * row_q
                a[q, :] = s * row_p + c * row_q
                a[p, q] = 0.0
                a[q, p] = 0.0
                vec_p = v[:, p].copy()
                vec_q = v[:, q].copy()
                v[:, p] = c * vec_p - s * vec_q
                v[:, q] = s * vec_p + c * vec_q

    values = np.diag(a).copy()
    order = np.argsort(-values, kind="stable")
    values = values[order]
    v = v[:, order]
    for j in range(m):
        v[:, j] = fix_sign(v[:, j])
    return values, v


def fix_sign(vec: np.ndarray) -> np.ndarray:
    """Flip a vector so its largest-magnitude component is positive."""
    idx = int(np.argmax(np.abs(vec)))
    if vec[idx] < 0:
        return -vec
    return vec
