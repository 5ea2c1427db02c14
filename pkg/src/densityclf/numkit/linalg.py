"""Dense linear-algebra helpers used by the Gaussian densities."""

import numpy as np
from scipy.linalg import solve_triangular


class NotPositiveDefinite(ValueError):
    """Raised when a Cholesky pivot is not strictly positive."""


def cholesky(a: np.ndarray, sym_rtol: float = 1e-10) -> np.ndarray:
    """Lower-triangular factor ``L`` with ``L @ L.T == a``.

    The matrix must be square and symmetric to ``sym_rtol`` relative to its
    largest entry. Degenerate covariances surface as :class:`NotPositiveDefinite`
    so callers can regularize and retry.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"cholesky needs a square matrix, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise NotPositiveDefinite("matrix has non-finite entries")
    scale = max(np.max(np.abs(a)), 1.0) if a.size else 1.0
    if np.max(np.abs(a - a.T), initial=0.0) > sym_rtol * scale:
        raise ValueError("cholesky needs a symmetric matrix")
    try:
        low = np.linalg.cholesky(a)
    except np.linalg.LinAlgError as exc:
        raise NotPositiveDefinite(str(exc)) from None
    if np.any(np.diag(low) <= 0.0):
        raise NotPositiveDefinite("non-positive pivot")
    return low


def chol_logdet(low: np.ndarray) -> float:
    """log det(A) from its Cholesky factor."""
    return float(2.0 * np.sum(np.log(np.diag(low))))


def chol_solve_lower(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    """Solve ``L y = b`` for lower-triangular ``L``; ``b`` may hold several columns."""
    return solve_triangular(low, b, lower=True, check_finite=False)


def logsumexp(v, axis=None):
    """Max-shifted ``log(sum(exp(v)))``.

    All ``-inf`` slices give ``-inf`` rather than NaN.
    """
    v = np.asarray(v, dtype=float)
    if v.size == 0:
        raise ValueError("logsumexp of an empty array")
    m = np.max(v, axis=axis, keepdims=True)
    m_safe = np.where(np.isfinite(m), m, 0.0)
    with np.errstate(divide="ignore"):
        out = np.log(np.sum(np.exp(v - m_safe), axis=axis, keepdims=True)) + m_safe
    if axis is None:
        return float(out.reshape(()))
    return np.squeeze(out, axis=axis)
