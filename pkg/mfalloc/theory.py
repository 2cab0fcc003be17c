"""Checks for the exact and noisy recovery guarantees of GOMP, plus an exhaustive oracle.

The verifiers work on a known (planted or hypothesized) basis set ``S_g``; the
consistency condition cannot be evaluated before a basis set is identified.
Index lists here are 0-based.
"""

from __future__ import annotations

import itertools
import logging
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Dict, List, NamedTuple, Optional, Sequence, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field
from scipy import linalg as sla

from .bifidelity import trial_seeds
from .linalg import as_matrix, check_indices, gram, least_squares, projection_residual
from .models import synthetic_recovery_instance
from .selectors import SelectorConfig, Termination, select_gomp

logger = logging.getLogger(__name__)

BASIS_RANK_RTOL = 1e-10
MAX_SUBSETS = 10**6
ORACLE_CHUNK = 4096
NOISELESS_EPSILON = 1e-10
EPSILON_MARGIN = 1.01


class RankDeficientBasisError(ValueError):
    def __init__(self, singular_value: float, largest: float):
        super().__init__(
            f"basis columns are numerically rank deficient: smallest singular value "
            f"{singular_value:.3e} <= {BASIS_RANK_RTOL:g} x largest ({largest:.3e})"
        )
        self.singular_value = singular_value
        self.largest = largest


class RecoveryDiagnostics(BaseModel):
    """Recovery-condition quantities for one basis set.

    ``conditions_met`` holds ``consistency`` (D_bar < 1), ``row_mass`` (the
    minimum basis-row coefficient mass beats ``row_mass_requirement``) and
    ``well_conditioned`` (lambda_bar > 0).
    """

    model_config = ConfigDict(frozen=True, ser_json_inf_nan="constants")

    d_bar: float = Field(ge=0)
    lambda_bar: float = Field(ge=0)
    epsilon_threshold: float
    min_row_mass: float
    row_mass_requirement: float
    sigma: float = Field(default=0.0, ge=0)
    eta: float = 0.1
    epsilon: float = 0.0
    conditions_met: Dict[str, bool]

    @property
    def all_met(self) -> bool:
        return all(self.conditions_met.values())

    def to_json(self) -> str:
        return self.model_dump_json(indent=2)


def _basis_and_rest(A: np.ndarray, S_g: Sequence[int]) -> Tuple[np.ndarray, np.ndarray]:
    basis = np.sort(check_indices(S_g, A.shape[1], "S_g"))
    if basis.size == 0:
        raise ValueError("S_g must contain at least one index")
    return basis, np.setdiff1d(np.arange(A.shape[1]), basis)


def expansion_matrix(A, S_g: Sequence[int]) -> np.ndarray:
    """Least-squares coefficients ``D`` of every non-basis column in the basis ``A[:, S_g]``.

    Rows follow ``S_g`` in ascending order and columns the non-basis indices in
    ascending order.
    """

    A = as_matrix(A, "A")
    basis, rest = _basis_and_rest(A, S_g)
    C = A[:, basis]
    s = sla.svdvals(C)
    if s[-1] <= BASIS_RANK_RTOL * s[0] or basis.size > A.shape[0]:
        raise RankDeficientBasisError(float(s[-1]) if basis.size <= A.shape[0] else 0.0, float(s[0]))
    if rest.size == 0:
        return np.zeros((basis.size, 0))
    return least_squares(C, A[:, rest])


def consistency_bound(D) -> float:
    """``D_bar``: the largest column l1 norm of ``D`` (0 for an empty ``D``)."""

    D = np.asarray(D, dtype=np.float64)
    if D.size == 0:
        return 0.0
    if D.ndim == 1:
        D = D.reshape(-1, 1)
    return float(np.abs(D).sum(axis=0).max())


def lambda_min(A, S_g: Sequence[int]) -> float:
    """Smallest eigenvalue of the basis Gram matrix ``A_Sg^T A_Sg``."""

    A = as_matrix(A, "A")
    basis, _ = _basis_and_rest(A, S_g)
    C = A[:, basis]
    return max(float(sla.eigvalsh(C.T @ C)[0]), 0.0)


def epsilon_threshold(d_bar: float, sigma: float, eta: float, n: int, d: int) -> float:
    """Smallest admissible stopping tolerance under i.i.d. Gaussian noise of level ``sigma``."""

    if d_bar >= 1.0:
        return math.inf
    if sigma == 0.0:
        return 0.0
    nd = n * d
    return sigma * math.sqrt(2.0 * nd * math.log(2.0 * nd / eta)) / (1.0 - d_bar)


def admissible_epsilon(threshold: float) -> float:
    """Stopping tolerance strictly above ``threshold`` (``1e-10`` in the noiseless case)."""

    if threshold == 0.0:
        return NOISELESS_EPSILON
    return EPSILON_MARGIN * threshold


def row_masses(D) -> np.ndarray:
    """Coefficient mass ``sqrt(1 + sum_j D_ij^2)`` of each basis row; the 1 is the row's own column."""

    D = np.asarray(D, dtype=np.float64)
    if D.ndim == 1:
        D = D.reshape(-1, 1)
    return np.sqrt(1.0 + np.sum(D * D, axis=1))


def noisy_thresholds(
    D,
    sigma: float,
    eta: float,
    n: int,
    d: int,
    lambda_bar: float,
    epsilon: Optional[float] = None,
) -> RecoveryDiagnostics:
    """Evaluate the noisy-recovery conditions for expansion matrix ``D``.

    ``epsilon`` defaults to the admissible tolerance just above the threshold.
    """

    if sigma < 0:
        raise ValueError(f"sigma must be non-negative, got {sigma}")
    if not 0.0 < eta < 0.5:
        raise ValueError(f"eta must lie in (0, 0.5), got {eta}")
    if n < 1 or d < 1:
        raise ValueError(f"n and d must be positive, got n={n}, d={d}")

    d_bar = consistency_bound(D)
    threshold = epsilon_threshold(d_bar, sigma, eta, n, d)
    if epsilon is None:
        epsilon = admissible_epsilon(threshold)
    min_mass = float(row_masses(D).min())
    if lambda_bar > 0 and math.isfinite(epsilon):
        requirement = epsilon * math.sqrt(8.0) / lambda_bar
    else:
        requirement = math.inf

    conditions = {
        "consistency": d_bar < 1.0,
        "row_mass": min_mass > requirement,
        "well_conditioned": lambda_bar > 0.0,
    }
    if not all(conditions.values()):
        failed = ", ".join(name for name, ok in conditions.items() if not ok)
        logger.warning("recovery conditions not met: %s (D_bar=%.6g, lambda_bar=%.6g)", failed, d_bar, lambda_bar)
    return RecoveryDiagnostics(
        d_bar=d_bar,
        lambda_bar=max(lambda_bar, 0.0),
        epsilon_threshold=threshold,
        min_row_mass=min_mass,
        row_mass_requirement=requirement,
        sigma=sigma,
        eta=eta,
        epsilon=epsilon,
        conditions_met=conditions,
    )


def diagnose(A, S_g: Sequence[int], sigma: float = 0.0, eta: float = 0.1) -> RecoveryDiagnostics:
    """expansion_matrix, consistency_bound, lambda_min and noisy_thresholds in one call."""

    A = as_matrix(A, "A")
    D = expansion_matrix(A, S_g)
    d, n = A.shape
    return noisy_thresholds(D, sigma, eta, n, d, lambda_min(A, S_g))


# ---------------------------------------------------------------------------
# exhaustive oracle
# ---------------------------------------------------------------------------


class OracleResult(NamedTuple):
    indices: Tuple[int, ...]
    residual: float
    evaluated: int


def _better(candidate: float, best: float, scale: float) -> bool:
    return candidate < best - 1e-12 * max(abs(best), scale)


def brute_force_cssp(A, m: int, workers: int = 1, max_subsets: int = MAX_SUBSETS) -> OracleResult:
    """Best size-``m`` column subset by exhaustive search of the projection residual.

    Subsets are visited in lexicographic order; near-ties keep the earlier subset.
    """

    A = as_matrix(A, "A")
    n = A.shape[1]
    if not 1 <= m <= n:
        raise ValueError(f"m must satisfy 1 <= m <= {n}, got {m}")
    count = math.comb(n, m)
    if count > max_subsets:
        raise ValueError(f"C({n}, {m}) = {count} subsets exceeds the oracle limit of {max_subsets}")

    scale = 1e-300 + 1e-15 * float(np.sum(A * A))

    def best_of(chunk: List[Tuple[int, ...]]) -> Tuple[Tuple[int, ...], float]:
        best_subset, best_value = chunk[0], projection_residual(A, chunk[0])
        for subset in chunk[1:]:
            value = projection_residual(A, subset)
            if _better(value, best_value, scale):
                best_subset, best_value = subset, value
        return best_subset, best_value

    subsets = itertools.combinations(range(n), m)
    chunks = iter(lambda: list(itertools.islice(subsets, ORACLE_CHUNK)), [])
    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            partial = list(executor.map(best_of, chunks))
    else:
        partial = [best_of(chunk) for chunk in chunks]

    best_subset, best_value = partial[0]
    for subset, value in partial[1:]:
        if _better(value, best_value, scale):
            best_subset, best_value = subset, value
    logger.info("oracle searched %d subsets of size %d: best %s residual %.6g", count, m, best_subset, best_value)
    return OracleResult(tuple(int(i) for i in best_subset), float(best_value), count)


# ---------------------------------------------------------------------------
# recovery experiments
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RecoveryOutcome:
    selected: Tuple[int, ...]
    planted: Tuple[int, ...]
    termination: Termination
    epsilon: float
    max_coefficient_error: Optional[float] = None
    coefficient_bound: Optional[float] = None

    @property
    def recovered(self) -> bool:
        return set(self.selected) == set(self.planted)

    @property
    def subset_of_planted(self) -> bool:
        return set(self.selected) <= set(self.planted)

    @property
    def within_bound(self) -> Optional[bool]:
        if self.max_coefficient_error is None or self.coefficient_bound is None:
            return None
        return self.max_coefficient_error <= self.coefficient_bound

    @property
    def success(self) -> bool:
        return self.recovered and self.within_bound is not False


def check_noiseless_recovery(
    A, S_g: Sequence[int], epsilon: float = NOISELESS_EPSILON, steps: Optional[int] = None
) -> RecoveryOutcome:
    """Run GOMP for ``steps`` (default ``|S_g|``) iterations with lambda unbounded."""

    A = as_matrix(A, "A")
    basis, _ = _basis_and_rest(A, S_g)
    steps = basis.size if steps is None else steps
    config = SelectorConfig(method="gomp", target_size=steps, gomp_epsilon=epsilon)
    result = select_gomp(gram(A), config)
    return RecoveryOutcome(
        selected=result.ordered_indices,
        planted=tuple(int(i) for i in basis),
        termination=result.termination,
        epsilon=epsilon,
    )


def check_noisy_recovery(A, S_g: Sequence[int], D, sigma: float, eta: float = 0.1) -> RecoveryOutcome:
    """Run GOMP with the admissible tolerance and compare its coefficients with ``D``.

    ``D`` is the planted expansion (rows ascending ``S_g``, columns ascending
    non-basis indices). The coefficient bound is ``sigma * sqrt(2 log(2|S_g|/eta) / lambda_bar)``.
    """

    A = as_matrix(A, "A")
    basis, rest = _basis_and_rest(A, S_g)
    D = np.asarray(D, dtype=np.float64).reshape(basis.size, rest.size)
    d, n = A.shape
    lambda_bar = lambda_min(A, basis)
    epsilon = admissible_epsilon(epsilon_threshold(consistency_bound(D), sigma, eta, n, d))
    if not math.isfinite(epsilon):
        raise ValueError("D_bar >= 1: no admissible stopping tolerance exists")

    result = select_gomp(gram(A), SelectorConfig(method="gomp", target_size=n, gomp_epsilon=epsilon))
    bound = sigma * math.sqrt(2.0 * math.log(2.0 * basis.size / eta) / lambda_bar) if lambda_bar > 0 else math.inf

    max_error = None
    if set(result.ordered_indices) == set(basis.tolist()):
        B = result.dense_coefficients()[np.ix_(basis, rest)]
        max_error = float(np.abs(B - D).max()) if D.size else 0.0

    return RecoveryOutcome(
        selected=result.ordered_indices,
        planted=tuple(int(i) for i in basis),
        termination=result.termination,
        epsilon=epsilon,
        max_coefficient_error=max_error,
        coefficient_bound=bound,
    )


@dataclass(frozen=True)
class MonteCarloSummary:
    successes: int
    trials: int
    target_rate: float

    @property
    def rate(self) -> float:
        return self.successes / self.trials

    @property
    def meets_target(self) -> bool:
        return self.rate >= self.target_rate


def monte_carlo_recovery(
    d: int,
    basis_size: int,
    n: int,
    coeff_bound: float,
    sigma: float,
    eta: float = 0.1,
    trials: int = 100,
    seed: int = 0,
) -> MonteCarloSummary:
    """Empirical noisy-recovery success rate against the ``1 - 2 eta`` guarantee."""

    if trials < 1:
        raise ValueError(f"trials must be positive, got {trials}")
    successes = 0
    for trial_seed in trial_seeds(seed, trials):
        A, S_g, D = synthetic_recovery_instance(d, basis_size, n, coeff_bound, sigma, trial_seed)
        if check_noisy_recovery(A, S_g, D, sigma, eta).success:
            successes += 1
    summary = MonteCarloSummary(successes, trials, 1.0 - 2.0 * eta)
    if not summary.meets_target:
        logger.warning(
            "noisy recovery rate %.3f below guaranteed %.3f over %d trials", summary.rate, summary.target_rate, trials
        )
    return summary
