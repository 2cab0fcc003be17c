"""Column subset selectors: GOMP plus the five baselines it is compared against.

All selectors return 0-based indices in selection order. Ties between
candidates (criteria within ``TIE_RTOL`` of the best) go to the smallest index.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Any, Dict, List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from .linalg import (
    as_matrix,
    frobenius_sq,
    gram as gram_matrix,
    least_squares,
    mixed_norm_21,
    normalize_columns,
    normalize_gram,
    svd,
)

logger = logging.getLogger(__name__)

TIE_RTOL = 1e-12
GOMP_RANK_RTOL = 1e-10
PIVOT_RTOL = 1e-12
UINT64_MAX = 2**64 - 1


class Method(str, Enum):
    GOMP = "gomp"
    CHOLESKY = "chol"
    QR = "qr"
    LU = "lu"
    LEVERAGE = "lev"
    RANDOM = "rand"

    @property
    def is_greedy(self) -> bool:
        return self in (Method.GOMP, Method.CHOLESKY, Method.QR, Method.LU)


_METHOD_ALIASES = {
    "cholesky": Method.CHOLESKY,
    "leverage": Method.LEVERAGE,
    "random": Method.RANDOM,
}

METHOD_NAMES = tuple(method.value for method in Method)


def parse_method(name: str) -> Method:
    key = name.strip().lower()
    if key in _METHOD_ALIASES:
        return _METHOD_ALIASES[key]
    try:
        return Method(key)
    except ValueError:
        raise ValueError(f"Unknown method '{name}'; valid names: {', '.join(METHOD_NAMES)}") from None


class Termination(str, Enum):
    REACHED_TARGET = "reached_target"
    EPSILON_STOP = "epsilon_stop"
    LAMBDA_STOP = "lambda_stop"
    EXHAUSTED_RANK = "exhausted_rank"


class SelectorConfig(BaseModel):
    """One selector run: the method and every knob it reads.

    ``gomp_lambda=None`` means unbounded (no sparsity stop); ``leverage_rank=None``
    means the target size, capped at the ensemble rank bound ``min(rows, cols)``.
    """

    model_config = ConfigDict(frozen=True)

    method: Method = Method.GOMP
    target_size: int = Field(default=1, ge=1)
    gomp_lambda: Optional[float] = Field(default=None, gt=0)
    gomp_epsilon: float = Field(default=0.0, ge=0)
    leverage_rank: Optional[int] = Field(default=None, ge=1)
    rng_seed: int = Field(default=0, ge=0, le=UINT64_MAX)
    normalize_columns: bool = False

    @field_validator("method", mode="before")
    @classmethod
    def _coerce_method(cls, value: Any) -> Any:
        if isinstance(value, str):
            return parse_method(value)
        return value

    def leverage_rank_for(self, rows: int, cols: int) -> int:
        if self.leverage_rank is not None:
            return self.leverage_rank
        return min(self.target_size, rows, cols)


@dataclass(frozen=True)
class SelectionResult:
    ordered_indices: Tuple[int, ...]
    step_scores: Tuple[float, ...]
    termination: Termination
    method: Method
    coefficient_matrix: Optional[np.ndarray] = field(default=None, compare=False)
    config: Optional[SelectorConfig] = field(default=None, compare=False)

    def __post_init__(self):
        if len(self.ordered_indices) != len(self.step_scores):
            raise ValueError("ordered_indices and step_scores must have equal length")
        if len(set(self.ordered_indices)) != len(self.ordered_indices):
            raise ValueError(f"selected indices are not distinct: {self.ordered_indices}")

    def __len__(self) -> int:
        return len(self.ordered_indices)

    def prefix(self, size: int) -> Tuple[int, ...]:
        return self.ordered_indices[:size]

    def dense_coefficients(self) -> np.ndarray:
        """Full ``n x n`` coefficient matrix; rows outside the selection are zero."""

        if self.coefficient_matrix is None:
            raise ValueError(f"{self.method.value} does not produce a coefficient matrix")
        n = self.coefficient_matrix.shape[1]
        B = np.zeros((n, n))
        B[np.asarray(self.ordered_indices, dtype=np.intp), :] = self.coefficient_matrix
        return B

    def to_dict(self, one_based: bool = True) -> Dict[str, Any]:
        offset = 1 if one_based else 0
        return {
            "method": self.method.value,
            "indices": [index + offset for index in self.ordered_indices],
            "scores": [float(score) for score in self.step_scores],
            "termination": self.termination.value,
        }


def _pick(values: np.ndarray, available: np.ndarray) -> int:
    """Index of the largest available value, smallest index among near-ties."""

    candidates = np.where(available, values, -np.inf)
    best = candidates.max()
    threshold = best - TIE_RTOL * abs(best)
    return int(np.flatnonzero(candidates >= threshold)[0])


def _check_target(m: int, n: int):
    if m < 1 or m > n:
        raise ValueError(f"target size must satisfy 1 <= m <= {n}, got {m}")


def select_gomp(gram, config: SelectorConfig) -> SelectionResult:
    """Group orthogonal matching pursuit on the Gram matrix.

    The group correlation of candidate ``i`` is the 2-norm of column ``i`` of the
    residual-correlation matrix ``R = Q - Q B``.
    """

    Q = as_matrix(gram, "gram")
    n = Q.shape[0]
    if Q.shape != (n, n):
        raise ValueError(f"gram must be square, got shape {Q.shape}")
    if config.normalize_columns:
        Q = normalize_gram(Q)
    m = config.target_size
    _check_target(m, n)

    B = np.zeros((n, n))
    active: List[int] = []
    scores: List[float] = []
    available = np.ones(n, dtype=bool)
    rank_floor = None
    termination = Termination.REACHED_TARGET

    while True:
        if config.gomp_lambda is not None and mixed_norm_21(B.T) >= 1.0 / config.gomp_lambda:
            termination = Termination.LAMBDA_STOP
            break
        if len(active) >= m:
            termination = Termination.REACHED_TARGET
            break

        R = Q - Q @ B
        correlations = np.linalg.norm(R, axis=0)
        if rank_floor is None:
            rank_floor = GOMP_RANK_RTOL * float(correlations.max())
        best = _pick(correlations, available)
        score = float(correlations[best])
        if score <= rank_floor:
            termination = Termination.EXHAUSTED_RANK
            break
        if score <= config.gomp_epsilon:
            termination = Termination.EPSILON_STOP
            break

        active.append(best)
        scores.append(score)
        available[best] = False
        B[:] = 0.0
        B[active, :] = least_squares(Q[np.ix_(active, active)], Q[active, :])
        logger.debug("gomp step %d: index %d, correlation %.6g", len(active), best, score)

    return SelectionResult(
        ordered_indices=tuple(active),
        step_scores=tuple(scores),
        termination=termination,
        method=Method.GOMP,
        coefficient_matrix=B[active, :].copy(),
    )


def select_pivoted_cholesky(gram, m: int, normalize: bool = False) -> SelectionResult:
    """Outer-product pivoted Cholesky; pivots on the Schur-complement diagonal."""

    Q = as_matrix(gram, "gram")
    n = Q.shape[0]
    if Q.shape != (n, n):
        raise ValueError(f"gram must be square, got shape {Q.shape}")
    if normalize:
        Q = normalize_gram(Q)
    _check_target(m, n)

    diagonal = np.diag(Q).copy()
    floor = PIVOT_RTOL * max(float(diagonal.max()), 0.0)
    L = np.zeros((n, m))
    available = np.ones(n, dtype=bool)
    chosen: List[int] = []
    scores: List[float] = []
    termination = Termination.REACHED_TARGET

    for step in range(m):
        pivot = _pick(diagonal, available)
        value = float(diagonal[pivot])
        if value <= floor or value <= 0.0:
            termination = Termination.EXHAUSTED_RANK
            break
        column = (Q[:, pivot] - L[:, :step] @ L[pivot, :step]) / np.sqrt(value)
        L[:, step] = column
        diagonal -= column**2
        available[pivot] = False
        chosen.append(pivot)
        scores.append(value)

    return SelectionResult(tuple(chosen), tuple(scores), termination, Method.CHOLESKY)


def select_pivoted_qr(ensemble, m: int, normalize: bool = False) -> SelectionResult:
    """Column-pivoted Gram-Schmidt QR; pivots on the largest residual column norm."""

    A = as_matrix(ensemble, "ensemble")
    if normalize:
        A = normalize_columns(A)
    n = A.shape[1]
    _check_target(m, n)

    residual = A.copy()
    norms = np.linalg.norm(residual, axis=0)
    floor = PIVOT_RTOL * float(norms.max())
    available = np.ones(n, dtype=bool)
    chosen: List[int] = []
    scores: List[float] = []
    termination = Termination.REACHED_TARGET

    for _ in range(m):
        pivot = _pick(norms, available)
        value = float(norms[pivot])
        if value <= floor or value == 0.0:
            termination = Termination.EXHAUSTED_RANK
            break
        q = residual[:, pivot] / value
        # two passes keep the residual orthogonal to the chosen columns
        for _ in range(2):
            residual -= np.outer(q, q @ residual)
        residual[:, pivot] = 0.0
        norms = np.linalg.norm(residual, axis=0)
        available[pivot] = False
        chosen.append(pivot)
        scores.append(value)

    return SelectionResult(tuple(chosen), tuple(scores), termination, Method.QR)


def select_pivoted_lu(ensemble, m: int, normalize: bool = False) -> SelectionResult:
    """Greedy pick of the column holding the largest-magnitude residual entry.

    The residual ``A - A_S (A_S)^+ A`` is recomputed from scratch after each pick.
    """

    A = as_matrix(ensemble, "ensemble")
    if normalize:
        A = normalize_columns(A)
    n = A.shape[1]
    _check_target(m, n)

    residual = A
    floor = PIVOT_RTOL * float(np.abs(A).max())
    available = np.ones(n, dtype=bool)
    chosen: List[int] = []
    scores: List[float] = []
    termination = Termination.REACHED_TARGET

    for _ in range(m):
        column_max = np.abs(residual).max(axis=0)
        pivot = _pick(column_max, available)
        value = float(column_max[pivot])
        if value <= floor or value == 0.0:
            termination = Termination.EXHAUSTED_RANK
            break
        available[pivot] = False
        chosen.append(pivot)
        scores.append(value)
        C = A[:, chosen]
        residual = A - C @ least_squares(C, A)

    return SelectionResult(tuple(chosen), tuple(scores), termination, Method.LU)


def leverage_scores(ensemble, k: int) -> np.ndarray:
    """Rank-``k`` column leverage scores from the top right singular vectors."""

    A = as_matrix(ensemble, "ensemble")
    limit = min(A.shape)
    if not 1 <= k <= limit:
        raise ValueError(f"leverage rank must satisfy 1 <= k <= {limit}, got {k}")
    vt = svd(A).vt
    return np.sum(vt[:k, :] ** 2, axis=0)


def select_leverage(ensemble, m: int, k: int, normalize: bool = False) -> SelectionResult:
    """Deterministic leverage sampling: the ``m`` highest rank-``k`` scores."""

    A = as_matrix(ensemble, "ensemble")
    if normalize:
        A = normalize_columns(A)
    _check_target(m, A.shape[1])
    scores = leverage_scores(A, k)
    # quantize so round-off never reorders tied scores
    key = np.round(scores / max(float(scores.max()), np.finfo(float).tiny), 12)
    order = np.argsort(-key, kind="stable")[:m]
    return SelectionResult(
        ordered_indices=tuple(int(index) for index in order),
        step_scores=tuple(float(scores[index]) for index in order),
        termination=Termination.REACHED_TARGET,
        method=Method.LEVERAGE,
    )


def random_generator(seed: int) -> np.random.Generator:
    if not 0 <= seed <= UINT64_MAX:
        raise ValueError(f"seed must be an unsigned 64-bit integer, got {seed}")
    return np.random.Generator(np.random.Philox(seed))


def select_random(n: int, m: int, seed: int) -> SelectionResult:
    """Uniform sample without replacement from a counter-based generator."""

    _check_target(m, n)
    order = random_generator(seed).permutation(n)[:m]
    return SelectionResult(
        ordered_indices=tuple(int(index) for index in order),
        step_scores=(0.0,) * m,
        termination=Termination.REACHED_TARGET,
        method=Method.RANDOM,
    )


def group_lasso_objective(ensemble, B, lam: float) -> float:
    """``||A - A B||_F^2 + lam * ||B^T||_{2,1}`` (the relaxed subset objective)."""

    A = as_matrix(ensemble, "ensemble")
    n = A.shape[1]
    B = np.asarray(B, dtype=np.float64)
    if B.shape != (n, n):
        raise ValueError(f"B must have shape {(n, n)}, got {B.shape}")
    if lam < 0:
        raise ValueError(f"lambda must be non-negative, got {lam}")
    return frobenius_sq(A - A @ B) + lam * mixed_norm_21(B.T)


def select(config: SelectorConfig, ensemble=None, gram=None, weights=None) -> SelectionResult:
    """Dispatch ``config`` to its selector; the result records ``config``.

    GOMP and Cholesky read only the Gram matrix (computed from ``ensemble`` when not
    supplied); QR, LU and leverage need the ensemble itself.
    """

    return replace(_dispatch(config, ensemble, gram, weights), config=config)


def _dispatch(config: SelectorConfig, ensemble, gram, weights) -> SelectionResult:
    method = config.method
    m = config.target_size

    if method in (Method.GOMP, Method.CHOLESKY):
        if gram is None:
            if ensemble is None:
                raise ValueError(f"{method.value} needs an ensemble or its Gram matrix")
            gram = gram_matrix(ensemble, weights)
        if method is Method.GOMP:
            return select_gomp(gram, config)
        return select_pivoted_cholesky(gram, m, normalize=config.normalize_columns)

    if method is Method.RANDOM:
        if ensemble is not None:
            n = as_matrix(ensemble, "ensemble").shape[1]
        elif gram is not None:
            n = as_matrix(gram, "gram").shape[0]
        else:
            raise ValueError("rand needs an ensemble or a Gram matrix to size the candidate set")
        return select_random(n, m, config.rng_seed)

    if ensemble is None:
        raise ValueError(f"{method.value} needs the ensemble, not only its Gram matrix")
    if method is Method.QR:
        return select_pivoted_qr(ensemble, m, normalize=config.normalize_columns)
    if method is Method.LU:
        return select_pivoted_lu(ensemble, m, normalize=config.normalize_columns)
    A = as_matrix(ensemble, "ensemble")
    return select_leverage(A, m, config.leverage_rank_for(*A.shape), normalize=config.normalize_columns)
