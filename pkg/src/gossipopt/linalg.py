"""Dense linear algebra helpers shared by the whole package.

Everything operates on float64 numpy arrays.  Matrices follow the
column-per-agent convention used throughout: a state matrix is d x n with
one column per network node.  The helpers here add the validation the rest
of the package relies on (shape checks with informative messages, symmetry
gates before eigendecompositions, finiteness guards) on top of numpy's
numerics.
"""

from __future__ import annotations

import numpy as np

SYMMETRY_RTOL = 1e-10


def as_matrix(a) -> np.ndarray:
    """Coerce to a 2-d float64 array, rejecting anything else."""
    m = np.asarray(a, dtype=np.float64)
    if m.ndim != 2:
        raise ValueError(f"expected a 2-d array, got ndim={m.ndim}")
    return m


def as_vector(a) -> np.ndarray:
    """Coerce to a 1-d float64 array, rejecting anything else."""
    v = np.asarray(a, dtype=np.float64)
    if v.ndim != 1:
        raise ValueError(f"expected a 1-d array, got ndim={v.ndim}")
    return v


def check_finite(a, label: str = "array") -> np.ndarray:
    """Raise if *a* contains NaN or Inf; return it unchanged otherwise."""
    a = np.asarray(a)
    if not np.all(np.isfinite(a)):
        raise FloatingPointError(f"{label} contains non-finite entries")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit inner-dimension check.

    The error message names both shapes because the mismatch usually means a
    d x n state matrix and an n x n mixing matrix were passed in the wrong
    order.
    """
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul: inner dimensions differ, left is {a.shape}, right is {b.shape}"
        )
    return check_finite(a @ b, "matmul result")


def column_mean(m) -> np.ndarray:
    """Mean across columns: the network average of per-node columns."""
    m = as_matrix(m)
    return m.mean(axis=1)


def consensus_residual(m) -> np.ndarray:
    """Deviation of each column from the column mean.

    Each row of the result sums to zero (up to roundoff); the Frobenius
    norm of the result measures consensus error.
    """
    m = as_matrix(m)
    return m - m.mean(axis=1, keepdims=True)


def frobenius_sq(m) -> float:
    """Squared Frobenius norm."""
    m = np.asarray(m, dtype=np.float64)
    return float(np.sum(m * m))


def _check_symmetric(s) -> np.ndarray:
    s = as_matrix(s)
    if s.shape[0] != s.shape[1]:
        raise ValueError(f"expected a square matrix, got {s.shape}")
    check_finite(s, "symmetric input")
    scale = float(np.max(np.abs(s))) if s.size else 0.0
    asym = float(np.max(np.abs(s - s.T))) if s.size else 0.0
    if asym > SYMMETRY_RTOL * scale:
        raise ValueError(
            f"matrix is not symmetric: max|S - S^T| = {asym:.3e} exceeds "
            f"{SYMMETRY_RTOL:.0e} * max|S| = {SYMMETRY_RTOL * scale:.3e}"
        )
    return s


def symmetric_eigenpairs(s) -> tuple[np.ndarray, np.ndarray]:
    """Eigenvalues (descending) and matching eigenvectors of a symmetric matrix.

    Inputs that fail the symmetry gate are rejected rather than symmetrized;
    silently averaging S and S^T has hidden real bugs in mixing-matrix
    construction before.
    """
    s = _check_symmetric(s)
    vals, vecs = np.linalg.eigh(s)
    order = np.argsort(vals)[::-1]
    return vals[order], vecs[:, order]


def symmetric_eigenvalues(s) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, sorted descending."""
    vals, _ = symmetric_eigenpairs(s)
    return vals


def operator_norm_sq(m) -> float:
    """Squared spectral norm, i.e. the largest eigenvalue of M^T M."""
    m = as_matrix(m)
    if m.size == 0:
        return 0.0
    gram = m.T @ m
    gram = (gram + gram.T) / 2.0
    vals = np.linalg.eigvalsh(gram)
    return float(max(vals[-1], 0.0))
