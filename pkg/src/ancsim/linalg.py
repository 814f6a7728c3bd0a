"""Small dense symmetric linear algebra: Jacobi eigendecomposition and
Cholesky solves with a jitter fallback. Sized for correlation matrices
up to a few hundred taps."""

from __future__ import annotations

import numpy as np

from .errors import DataError, SingularMatrixError


def _require_symmetric(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=np.float64)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError("matrix must be square")
    if not np.allclose(a, a.T, rtol=1e-10, atol=1e-12):
        raise DataError("matrix must be symmetric")
    return a


def symmetric_eig(a, max_sweeps: int = 50):
    """Eigendecomposition of a symmetric matrix by cyclic Jacobi rotations.

    Returns (eigenvalues ascending, eigenvector matrix Q with columns
    matching the eigenvalues) such that Q diag(w) Q^T reconstructs a.
    """
    a = _require_symmetric(a).copy()
    n = a.shape[0]
    q = np.eye(n)
    if n == 1:
        return a.diagonal().copy(), q
    total = np.linalg.norm(a)
    for _ in range(max_sweeps):
        off = np.sqrt(max(np.sum(a * a) - np.sum(a.diagonal() ** 2), 0.0))
        if off <= 1e-14 * max(total, 1e-300):
            break
        for p in range(n - 1):
            for r in range(p + 1, n):
                apq = a[p, r]
                if abs(apq) <= 1e-300:
                    continue
                theta = (a[r, r] - a[p, p]) / (2.0 * apq)
                if abs(theta) > 1e8:
                    t = 1.0 / (2.0 * theta)
                else:
                    t = 1.0 / (abs(theta) + np.sqrt(theta * theta + 1.0))
                    if theta < 0:
                        t = -t
                c = 1.0 / np.sqrt(t * t + 1.0)
                s = t * c
                cp = a[:, p].copy()
                cq = a[:, r].copy()
                a[:, p] = c * cp - s * cq
                a[:, r] = s * cp + c * cq
                rp = a[p, :].copy()
                rq = a[r, :].copy()
                a[p, :] = c * rp - s * rq
                a[r, :] = s * rp + c * rq
                vp = q[:, p].copy()
                vq = q[:, r].copy()
                q[:, p] = c * vp - s * vq
                q[:, r] = s * vp + c * vq
    vals = a.diagonal().copy()
    order = np.argsort(vals)
    return vals[order], q[:, order]


def cholesky_factor(a: np.ndarray) -> np.ndarray:
    """Lower-triangular L with L L^T = a; raises on non-positive pivots."""
    a = np.asarray(a, dtype=np.float64)
    n = a.shape[0]
    low = np.zeros_like(a)
    for j in range(n):
        d = a[j, j] - np.dot(low[j, :j], low[j, :j])
        if d <= 0.0 or not np.isfinite(d):
            raise SingularMatrixError(
                f"non-positive pivot at column {j}: {d:.3e}")
        low[j, j] = np.sqrt(d)
        if j + 1 < n:
            low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ low[j, :j]) / low[j, j]
    return low


def _solve_triangular(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    n = low.shape[0]
    y = np.zeros(n)
    for i in range(n):
        y[i] = (b[i] - np.dot(low[i, :i], y[:i])) / low[i, i]
    x = np.zeros(n)
    for i in range(n - 1, -1, -1):
        x[i] = (y[i] - np.dot(low[i + 1:, i], x[i + 1:])) / low[i, i]
    return x


def solve_spd(a, b, jitter_scale: float = 1e-12, max_attempts: int = 4):
    """Solve a x = b for symmetric positive-definite a via Cholesky.

    Near-singular matrices get escalating diagonal jitter (starting at
    jitter_scale times the mean diagonal). Returns (x, jitter_applied);
    jitter_applied is 0.0 when the plain factorization succeeded.
    """
    a = _require_symmetric(a)
    b = np.asarray(b, dtype=np.float64)
    base = jitter_scale * max(float(np.trace(a)) / a.shape[0], 1e-300)
    jitter = 0.0
    last_err: Exception | None = None
    for attempt in range(max_attempts):
        try:
            low = cholesky_factor(a + jitter * np.eye(a.shape[0]))
            return _solve_triangular(low, b), jitter
        except SingularMatrixError as err:
            last_err = err
            jitter = base * (100.0 ** attempt) if jitter == 0.0 else jitter * 100.0
    raise SingularMatrixError(
        f"matrix not positive definite even with jitter {jitter:.3e}: {last_err}")


def condition_estimate(a) -> float:
    """lambda_max / lambda_min from the Jacobi eigenvalues (inf if singular)."""
    vals, _ = symmetric_eig(a)
    lo = float(np.min(np.abs(vals)))
    hi = float(np.max(np.abs(vals)))
    if lo == 0.0:
        return np.inf
    return hi / lo
