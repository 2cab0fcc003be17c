"""Dense linear algebra shared by the selectors, the surrogate and the verifiers.

Everything here is a pure function of its inputs. The SVD is the single
factorization behind the pseudoinverse, leverage scores and the rank-k floor.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

import numpy as np
from scipy import linalg as sla

logger = logging.getLogger(__name__)


class NonFiniteInputError(ValueError):
    """Raised when a matrix handed to the toolkit contains NaN or Inf."""

    def __init__(self, name: str, column: int):
        super().__init__(f"{name} has non-finite entries in column {column}")
        self.column = column


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``matrix = u @ diag(s) @ vt`` with ``s`` non-increasing."""

    u: np.ndarray
    s: np.ndarray
    vt: np.ndarray

    @property
    def rank_tolerance(self) -> float:
        if self.s.size == 0:
            return 0.0
        rows, cols = self.u.shape[0], self.vt.shape[1]
        return max(rows, cols) * np.finfo(float).eps * float(self.s[0])

    @property
    def rank(self) -> int:
        return int(np.count_nonzero(self.s > self.rank_tolerance))

    def inverse_singular_values(self) -> np.ndarray:
        """``1/s`` above the rank tolerance, 0 below it."""

        keep = self.s > self.rank_tolerance
        inv_s = np.zeros_like(self.s)
        inv_s[keep] = 1.0 / self.s[keep]
        return inv_s


def as_matrix(matrix, name: str = "matrix") -> np.ndarray:
    """Return ``matrix`` as a 2-D float64 array, rejecting empty or non-finite input."""

    array = np.asarray(matrix, dtype=np.float64)
    if array.ndim == 1:
        array = array.reshape(-1, 1)
    if array.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {array.shape}")
    if array.shape[0] < 1 or array.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and one column, got shape {array.shape}")

    finite = np.isfinite(array)
    if not finite.all():
        column = int(np.flatnonzero(~finite.all(axis=0))[0])
        raise NonFiniteInputError(name, column)
    return array


def check_indices(indices: Sequence[int], n: int, name: str = "subset") -> np.ndarray:
    """Validate a 0-based index list: distinct and within ``range(n)``."""

    index_array = np.asarray(list(indices), dtype=np.intp)
    if index_array.ndim != 1:
        raise ValueError(f"{name} must be a flat list of indices")
    if index_array.size and (index_array.min() < 0 or index_array.max() >= n):
        raise ValueError(f"{name} indices must lie in [0, {n}), got {index_array.tolist()}")
    if np.unique(index_array).size != index_array.size:
        raise ValueError(f"{name} indices must be distinct, got {index_array.tolist()}")
    return index_array


def gram(ensemble, weights=None) -> np.ndarray:
    """Inner-product matrix ``Q[i, j] = <a_i, a_j>_w`` of the ensemble columns.

    ``weights`` is an optional diagonal quadrature weight per row; the default is
    the Euclidean inner product.
    """

    A = as_matrix(ensemble, "ensemble")
    if weights is None:
        Q = A.T @ A
    else:
        w = np.asarray(weights, dtype=np.float64).reshape(-1)
        if w.shape[0] != A.shape[0]:
            raise ValueError(f"weights has length {w.shape[0]}, ensemble has {A.shape[0]} rows")
        if not np.all(np.isfinite(w)) or np.any(w < 0):
            raise ValueError("weights must be finite and non-negative")
        Q = A.T @ (w[:, None] * A)
    # exact symmetry; BLAS may differ in the last bit between the two triangles
    return 0.5 * (Q + Q.T)


def normalize_gram(Q) -> np.ndarray:
    """Gram matrix of the unit-normalized columns; zero columns stay zero."""

    Q = as_matrix(Q, "gram")
    d = np.sqrt(np.clip(np.diag(Q), 0.0, None))
    scale = np.divide(1.0, d, out=np.zeros_like(d), where=d > 0)
    return Q * np.outer(scale, scale)


def normalize_columns(ensemble) -> np.ndarray:
    A = as_matrix(ensemble, "ensemble")
    norms = np.linalg.norm(A, axis=0)
    scale = np.divide(1.0, norms, out=np.zeros_like(norms), where=norms > 0)
    return A * scale


def svd(matrix) -> SvdFactors:
    u, s, vt = sla.svd(as_matrix(matrix), full_matrices=False)
    return SvdFactors(u=u, s=s, vt=vt)


def pseudoinverse(matrix) -> np.ndarray:
    """Moore-Penrose pseudoinverse with ``rtol = max(rows, cols) * eps * s_max``."""

    factors = svd(matrix)
    return (factors.vt.T * factors.inverse_singular_values()) @ factors.u.T


def least_squares(basis, targets) -> np.ndarray:
    """Minimum-norm ``X`` minimizing ``||basis @ X - targets||_F``.

    A 1-D ``targets`` returns a 1-D coefficient vector.
    """

    B = as_matrix(basis, "basis")
    vector_target = np.ndim(targets) == 1
    T = as_matrix(targets, "targets")
    if T.shape[0] != B.shape[0]:
        raise ValueError(f"basis has {B.shape[0]} rows but targets have {T.shape[0]}")

    factors = svd(B)
    inv_s = factors.inverse_singular_values()
    if factors.rank < inv_s.size:
        logger.debug("least_squares truncated %d of %d singular values", inv_s.size - factors.rank, inv_s.size)
    X = factors.vt.T @ (inv_s[:, None] * (factors.u.T @ T))
    return X[:, 0] if vector_target else X


def frobenius_sq(matrix) -> float:
    A = np.asarray(matrix, dtype=np.float64)
    return float(np.sum(A * A))


def projection_residual(ensemble, subset: Sequence[int]) -> float:
    """Squared Frobenius residual ``||A - A_S (A_S)^+ A||_F^2`` of the column subset."""

    A = as_matrix(ensemble, "ensemble")
    S = check_indices(subset, A.shape[1])
    if S.size == 0:
        return frobenius_sq(A)
    C = A[:, S]
    R = A - C @ least_squares(C, A)
    return frobenius_sq(R)


def rank_k_error(ensemble, k: int) -> float:
    """Squared Frobenius error of the best rank-``k`` approximation (SVD tail)."""

    A = as_matrix(ensemble, "ensemble")
    limit = min(A.shape)
    if not 1 <= k <= limit:
        raise ValueError(f"k must satisfy 1 <= k <= {limit}, got {k}")
    s = sla.svdvals(A)
    return float(np.sum(s[k:] ** 2))


def mixed_norm_21(matrix) -> float:
    """Sum of the column 2-norms."""

    M = np.asarray(matrix, dtype=np.float64)
    if M.size == 0:
        return 0.0
    if M.ndim == 1:
        M = M.reshape(-1, 1)
    return float(np.linalg.norm(M, axis=0).sum())
