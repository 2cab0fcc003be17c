"""Bifidelity surrogate: low-fidelity selection and coefficients, high-fidelity basis.

The high-fidelity prediction at a parameter point is ``A^H_S c`` where ``c`` are the
least-squares coefficients of the low-fidelity snapshot in the basis ``A^L_S``.
"""

from __future__ import annotations

import csv
import io
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from .linalg import as_matrix, check_indices, frobenius_sq, gram, least_squares, rank_k_error
from .selectors import (
    Method,
    SelectionResult,
    SelectorConfig,
    UINT64_MAX,
    select,
)

logger = logging.getLogger(__name__)

SCORING_MODES = ("held_out", "all")
CSV_HEADER = ("method", "subset_size", "low_error", "high_error", "seed")
RANK_K = "rank-k"


@dataclass(frozen=True)
class Ensemble:
    """Snapshot columns at one fidelity together with their parameter points."""

    snapshots: np.ndarray
    parameters: np.ndarray
    fidelity_label: str = ""
    model_id: str = ""

    def __post_init__(self):
        snapshots = as_matrix(self.snapshots, "snapshots")
        parameters = np.asarray(self.parameters, dtype=np.float64)
        if parameters.ndim == 1:
            parameters = parameters.reshape(-1, 1)
        if parameters.ndim != 2 or parameters.shape[1] < 1:
            raise ValueError(f"parameters must be one vector per column, got shape {parameters.shape}")
        if parameters.shape[0] != snapshots.shape[1]:
            raise ValueError(
                f"{parameters.shape[0]} parameter vectors for {snapshots.shape[1]} snapshot columns"
            )
        object.__setattr__(self, "snapshots", snapshots)
        object.__setattr__(self, "parameters", parameters)

    @property
    def n_points(self) -> int:
        return self.snapshots.shape[1]

    @property
    def dim(self) -> int:
        return self.snapshots.shape[0]

    def columns(self, indices: Sequence[int]) -> np.ndarray:
        return self.snapshots[:, check_indices(indices, self.n_points)]

    def same_points(self, other: "Ensemble") -> bool:
        return self.parameters.shape == other.parameters.shape and np.array_equal(
            self.parameters, other.parameters
        )


@dataclass(frozen=True)
class BifidelityModel:
    selected_indices: Tuple[int, ...]
    low_basis: np.ndarray
    high_basis: np.ndarray
    selector_used: Optional[SelectorConfig] = None

    def __post_init__(self):
        size = len(self.selected_indices)
        if self.low_basis.shape[1] != size or self.high_basis.shape[1] != size:
            raise ValueError(
                f"basis column counts ({self.low_basis.shape[1]}, {self.high_basis.shape[1]}) "
                f"do not match {size} selected indices"
            )

    @property
    def size(self) -> int:
        return len(self.selected_indices)


@dataclass(frozen=True)
class ErrorRow:
    method: str
    subset_size: int
    low_error: float
    high_error: float
    seed: Optional[int] = None


@dataclass
class ErrorReport:
    rows: List[ErrorRow] = field(default_factory=list)

    def validate(self):
        last: Dict[Tuple[str, Optional[int]], int] = {}
        for row in self.rows:
            if row.low_error < 0 or row.high_error < 0:
                raise ValueError(f"negative error in row {row}")
            key = (row.method, row.seed)
            if key in last and row.subset_size <= last[key]:
                raise ValueError(f"subset sizes must increase within {row.method}: {row}")
            last[key] = row.subset_size

    def methods(self) -> List[str]:
        return list(dict.fromkeys(row.method for row in self.rows))

    def for_method(self, method: str) -> List[ErrorRow]:
        return [row for row in self.rows if row.method == method]

    def to_csv(self) -> str:
        buffer = io.StringIO()
        writer = csv.writer(buffer, lineterminator="\n")
        writer.writerow(CSV_HEADER)
        for row in self.rows:
            writer.writerow(
                [
                    row.method,
                    row.subset_size,
                    repr(float(row.low_error)),
                    repr(float(row.high_error)),
                    "" if row.seed is None else row.seed,
                ]
            )
        return buffer.getvalue()

    def to_plot_table(self) -> str:
        """Whitespace-separated table, one column per method (random as mean/min/max)."""

        sizes = sorted({row.subset_size for row in self.rows})
        columns: Dict[str, Dict[int, float]] = {}
        for method in self.methods():
            rows = self.for_method(method)
            if any(row.seed is not None for row in rows):
                summary = summarize_trials(self, method)
                columns[method] = {size: stats["high_mean"] for size, stats in summary.items()}
                columns[f"{method}_min"] = {size: stats["high_min"] for size, stats in summary.items()}
                columns[f"{method}_max"] = {size: stats["high_max"] for size, stats in summary.items()}
            else:
                columns[method] = {row.subset_size: row.high_error for row in rows}

        lines = ["# subset_size " + " ".join(columns)]
        for size in sizes:
            values = [repr(columns[name][size]) if size in columns[name] else "nan" for name in columns]
            lines.append(" ".join([str(size)] + values))
        return "\n".join(lines) + "\n"


def summarize_trials(report: ErrorReport, method: str) -> Dict[int, Dict[str, float]]:
    """Per-size mean/min/max of the errors of a seeded method."""

    grouped: Dict[int, List[ErrorRow]] = {}
    for row in report.for_method(method):
        grouped.setdefault(row.subset_size, []).append(row)
    summary = {}
    for size, rows in sorted(grouped.items()):
        low = np.array([row.low_error for row in rows])
        high = np.array([row.high_error for row in rows])
        summary[size] = {
            "low_mean": float(low.mean()),
            "low_min": float(low.min()),
            "low_max": float(low.max()),
            "high_mean": float(high.mean()),
            "high_min": float(high.min()),
            "high_max": float(high.max()),
            "trials": len(rows),
        }
    return summary


def fit(low: Ensemble, high_columns_at_S, selection: SelectionResult) -> BifidelityModel:
    """Package the selected low columns with the matching high-fidelity runs."""

    indices = tuple(selection.ordered_indices)
    if not indices:
        raise ValueError("selection is empty; nothing to fit")
    high_basis = as_matrix(high_columns_at_S, "high_columns_at_S")
    if high_basis.shape[1] != len(indices):
        raise ValueError(
            f"{high_basis.shape[1]} high-fidelity columns for {len(indices)} selected indices"
        )
    return BifidelityModel(
        selected_indices=indices,
        low_basis=low.columns(indices),
        high_basis=high_basis,
        selector_used=selection.config,
    )


def coefficients(model: BifidelityModel, low_snapshot) -> np.ndarray:
    snapshot = np.asarray(low_snapshot, dtype=np.float64).reshape(-1)
    if snapshot.shape[0] != model.low_basis.shape[0]:
        raise ValueError(
            f"low snapshot has length {snapshot.shape[0]}, basis has {model.low_basis.shape[0]} rows"
        )
    return least_squares(model.low_basis, snapshot)


def reconstruct_high(model: BifidelityModel, c) -> np.ndarray:
    c = np.asarray(c, dtype=np.float64).reshape(-1)
    if c.shape[0] != model.size:
        raise ValueError(f"expected {model.size} coefficients, got {c.shape[0]}")
    return model.high_basis @ c


def reconstruct_ensemble(model: BifidelityModel, low_snapshots) -> np.ndarray:
    """High-fidelity predictions for every column of ``low_snapshots``."""

    low = as_matrix(low_snapshots, "low_snapshots")
    return model.high_basis @ least_squares(model.low_basis, low)


def evaluate_error(truth, predictions, columns: Optional[Sequence[int]] = None) -> float:
    """Normalized squared error ``sum ||X_i - X~_i||^2 / sum ||X_i||^2``.

    ``columns`` restricts both sums to a subset of the columns.
    """

    X = truth.snapshots if isinstance(truth, Ensemble) else as_matrix(truth, "truth")
    P = as_matrix(predictions, "predictions")
    if X.shape != P.shape:
        raise ValueError(f"truth shape {X.shape} does not match predictions shape {P.shape}")
    if columns is not None:
        keep = check_indices(columns, X.shape[1], "columns")
        X, P = X[:, keep], P[:, keep]
    denominator = frobenius_sq(X)
    if denominator == 0.0:
        raise ValueError("truth is identically zero; the normalized error is undefined")
    return frobenius_sq(X - P) / denominator


def _scored_columns(n: int, indices: Sequence[int], scoring: str) -> Optional[List[int]]:
    if scoring == "all":
        return None
    selected = set(indices)
    return [j for j in range(n) if j not in selected]


def pair_errors(low: Ensemble, high: Ensemble, indices: Sequence[int], scoring: str) -> Tuple[float, float]:
    indices = list(indices)
    columns = _scored_columns(low.n_points, indices, scoring)
    if columns is not None and not columns:
        return 0.0, 0.0
    basis = low.columns(indices)
    weights = least_squares(basis, low.snapshots)
    low_prediction = basis @ weights
    high_prediction = high.columns(indices) @ weights
    return (
        evaluate_error(low.snapshots, low_prediction, columns),
        evaluate_error(high.snapshots, high_prediction, columns),
    )


def high_coefficient_error(high: Ensemble, indices: Sequence[int], scoring: str = "held_out") -> float:
    """Error of ``A^H_S (A^H_S)^+ A^H``, the reconstruction using high-fidelity coefficients."""

    columns = _scored_columns(high.n_points, indices, scoring)
    if columns is not None and not columns:
        return 0.0
    basis = high.columns(indices)
    return evaluate_error(high.snapshots, basis @ least_squares(basis, high.snapshots), columns)


def trial_seeds(base_seed: int, trials: int) -> List[int]:
    return [(base_seed + trial) % (UINT64_MAX + 1) for trial in range(trials)]


def sweep(
    low: Ensemble,
    high: Ensemble,
    methods: Iterable[SelectorConfig],
    sizes: Sequence[int],
    random_trials: int = 100,
    seed: int = 0,
    scoring: str = "held_out",
    workers: int = 1,
    include_rank_k: bool = False,
) -> ErrorReport:
    """Error-versus-subset-size study; selection always runs on the low ensemble.

    Greedy methods run once at the largest size and are scored on prefixes. Leverage
    is re-run per size, random per size and seed.
    """

    if scoring not in SCORING_MODES:
        raise ValueError(f"scoring must be one of {SCORING_MODES}, got {scoring!r}")
    if not low.same_points(high):
        raise ValueError("low and high ensembles are not defined on the same parameter points")
    sizes = [int(size) for size in sizes]
    if not sizes:
        raise ValueError("at least one subset size is required")
    if any(b <= a for a, b in zip(sizes, sizes[1:])):
        raise ValueError(f"subset sizes must be strictly increasing, got {sizes}")
    n = low.n_points
    if sizes[0] < 1 or sizes[-1] > n:
        raise ValueError(f"subset sizes must lie in [1, {n}], got {sizes}")
    if random_trials < 1:
        raise ValueError(f"random_trials must be positive, got {random_trials}")

    methods = list(methods)
    seen: Dict[str, int] = {}
    Q = None
    cells: List[Tuple[str, int, Optional[int], Optional[Tuple[int, ...]]]] = []
    for config in methods:
        label = config.method.value
        seen[label] = seen.get(label, 0) + 1
        if seen[label] > 1:
            label = f"{label}#{seen[label]}"
        if config.method.is_greedy:
            if config.method in (Method.GOMP, Method.CHOLESKY) and Q is None:
                Q = gram(low.snapshots)
            full = select(config.model_copy(update={"target_size": sizes[-1]}), ensemble=low.snapshots, gram=Q)
            for size in sizes:
                cells.append((label, size, None, full.prefix(size)))
        elif config.method is Method.LEVERAGE:
            for size in sizes:
                result = select(config.model_copy(update={"target_size": size}), ensemble=low.snapshots)
                cells.append((label, size, None, result.ordered_indices))
        else:
            for size in sizes:
                for trial_seed in trial_seeds(seed, random_trials):
                    cells.append((label, size, trial_seed, None))

    def evaluate(cell) -> ErrorRow:
        label, size, trial_seed, indices = cell
        if indices is None:
            config = SelectorConfig(method=Method.RANDOM, target_size=size, rng_seed=trial_seed)
            indices = select(config, ensemble=low.snapshots).ordered_indices
        low_error, high_error = pair_errors(low, high, indices, scoring)
        return ErrorRow(label, size, low_error, high_error, trial_seed)

    if workers > 1:
        with ThreadPoolExecutor(max_workers=workers) as executor:
            rows = list(executor.map(evaluate, cells))
    else:
        rows = [evaluate(cell) for cell in cells]

    if include_rank_k:
        low_total = frobenius_sq(low.snapshots)
        high_total = frobenius_sq(high.snapshots)
        limit = min(min(low.snapshots.shape), min(high.snapshots.shape))
        for size in sizes:
            if size > limit:
                break
            rows.append(
                ErrorRow(
                    RANK_K,
                    size,
                    rank_k_error(low.snapshots, size) / low_total,
                    rank_k_error(high.snapshots, size) / high_total,
                )
            )

    report = ErrorReport(rows)
    report.validate()
    logger.info("sweep finished: %d rows over %d methods", len(rows), len(report.methods()))
    return report
