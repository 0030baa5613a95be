"""Small dense float64 kernels.

Matrices and vectors are plain ``numpy.ndarray`` objects of dtype float64.
:func:`matmul` accumulates its inner dimension in a fixed, shape-independent
order so that a product entry is bit-identical whether it is computed inside a
large batch or on its own.
"""
from __future__ import annotations

import numpy as np

from .errors import ContractError, FactorizationError

SYMMETRY_RTOL = 1e-9
JITTER_SCALE = 1e-10


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a finite 2-D float64 array with no empty axis."""
    arr = np.asarray(a, dtype=np.float64)
    if arr.ndim != 2:
        raise ContractError(f"{name} must be 2-D, got shape {arr.shape}")
    if arr.shape[0] < 1 or arr.shape[1] < 1:
        raise ContractError(f"{name} must have at least one row and column, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite entries")
    return arr


def as_vector(v, name: str = "vector") -> np.ndarray:
    arr = np.asarray(v, dtype=np.float64)
    if arr.ndim != 1 or arr.shape[0] < 1:
        raise ContractError(f"{name} must be a non-empty 1-D array, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ContractError(f"{name} contains non-finite entries")
    return arr


def matmul(a, b) -> np.ndarray:
    """Matrix product with the inner index summed sequentially (k = 0, 1, ...)."""
    a = np.asarray(a, dtype=np.float64)
    b = np.asarray(b, dtype=np.float64)
    if a.ndim != 2 or b.ndim != 2:
        raise ContractError(f"matmul needs 2-D operands, got {a.shape} and {b.shape}")
    if a.shape[1] != b.shape[0]:
        raise ContractError(f"matmul dimension mismatch: {a.shape} x {b.shape}")
    q = a.shape[1]
    if q == 0:
        return np.zeros((a.shape[0], b.shape[1]))
    out = a[:, 0:1] * b[0:1, :]
    for k in range(1, q):
        out += a[:, k:k + 1] * b[k:k + 1, :]
    return out


def frobenius_norm_sq(a) -> float:
    a = np.asarray(a, dtype=np.float64)
    return float(np.sum(a * a))


def cholesky(a) -> np.ndarray:
    """Lower-triangular ``L`` with ``L @ L.T == a``.

    Raises :class:`FactorizationError` naming the first pivot that is not
    strictly positive.
    """
    a = np.asarray(a, dtype=np.float64)
    k = a.shape[0]
    low = np.zeros_like(a)
    for j in range(k):
        row = low[j, :j]
        pivot = a[j, j] - row @ row
        if not pivot > 0.0:
            raise FactorizationError(j, float(pivot))
        ljj = np.sqrt(pivot)
        low[j, j] = ljj
        if j + 1 < k:
            low[j + 1:, j] = (a[j + 1:, j] - low[j + 1:, :j] @ row) / ljj
    return low


def _check_symmetric(a: np.ndarray) -> None:
    if a.shape[0] != a.shape[1]:
        raise ContractError(f"expected a square matrix, got {a.shape}")
    scale = max(1.0, float(np.max(np.abs(a))))
    if float(np.max(np.abs(a - a.T))) > SYMMETRY_RTOL * scale:
        raise ContractError("matrix is not symmetric")


def _jittered(a: np.ndarray) -> np.ndarray:
    k = a.shape[0]
    return a + np.eye(k) * (JITTER_SCALE * float(np.trace(a)) / k)


def cholesky_with_jitter(a) -> np.ndarray:
    """Cholesky factor, retrying once with ``1e-10 * trace / k`` on the diagonal."""
    a = as_matrix(a, "a")
    _check_symmetric(a)
    try:
        return cholesky(a)
    except FactorizationError:
        return cholesky(_jittered(a))


def psd_factor(cov) -> np.ndarray:
    """A factor ``F`` with ``F @ F.T ~= cov`` for symmetric PSD ``cov``.

    Uses the jittered Cholesky; the all-zero matrix (a point mass) gets the
    zero factor since no diagonal shift can make it positive definite.
    """
    cov = as_matrix(cov, "cov")
    if not np.any(cov):
        return np.zeros_like(cov)
    return cholesky_with_jitter(cov)


def forward_substitute(low: np.ndarray, b: np.ndarray) -> np.ndarray:
    y = np.empty_like(b)
    for i in range(low.shape[0]):
        y[i] = (b[i] - low[i, :i] @ y[:i]) / low[i, i]
    return y


def back_substitute(up: np.ndarray, b: np.ndarray) -> np.ndarray:
    k = up.shape[0]
    x = np.empty_like(b)
    for i in range(k - 1, -1, -1):
        x[i] = (b[i] - up[i, i + 1:] @ x[i + 1:]) / up[i, i]
    return x


def solve_spd(a, b) -> np.ndarray:
    """Solve ``a @ x = b`` for symmetric positive definite ``a`` (k x k), ``b`` (k x r)."""
    a = as_matrix(a, "a")
    b = as_matrix(b, "b")
    if a.shape[0] != b.shape[0]:
        raise ContractError(f"solve_spd dimension mismatch: {a.shape} vs {b.shape}")
    low = cholesky_with_jitter(a)
    return back_substitute(low.T, forward_substitute(low, b))
