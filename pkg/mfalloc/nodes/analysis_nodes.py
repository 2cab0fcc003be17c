"""Nodes for error sweeps, the exhaustive oracle and recovery diagnostics."""

from __future__ import annotations

import json
import logging
from typing import Tuple

from ..bifidelity import Ensemble, sweep
from ..config import parse_index_list
from ..linalg import rank_k_error
from ..selectors import METHOD_NAMES, UINT64_MAX, SelectorConfig
from ..theory import brute_force_cssp, diagnose
from ._node_utils import CATEGORY_ROOT, parse_sizes, require_ensemble, split_list

logger = logging.getLogger(__name__)


class ReconstructionSweep:
    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {
                "low_ensemble": ("ENSEMBLE",),
                "high_ensemble": ("ENSEMBLE",),
                "methods": ("STRING", {"default": ",".join(METHOD_NAMES)}),
                "sizes": ("STRING", {"default": "1 2 3 4 5 6 7 8 9 10"}),
            },
            "optional": {
                "random_trials": ("INT", {"default": 100, "min": 1, "max": 100000}),
                "seed": ("INT", {"default": 0, "min": 0, "max": UINT64_MAX}),
                "scoring": (["held_out", "all"], {"default": "held_out"}),
                "workers": ("INT", {"default": 1, "min": 1, "max": 64}),
                "include_rank_k": ("BOOLEAN", {"default": False}),
            },
        }

    RETURN_TYPES = ("STRING", "STRING")
    RETURN_NAMES = ("report_csv", "plot_table")
    FUNCTION = "run"
    CATEGORY = f"{CATEGORY_ROOT}/Analysis"

    def run(
        self,
        low_ensemble: Ensemble,
        high_ensemble: Ensemble,
        methods: str,
        sizes: str,
        random_trials: int = 100,
        seed: int = 0,
        scoring: str = "held_out",
        workers: int = 1,
        include_rank_k: bool = False,
    ) -> Tuple[str, str]:
        configs = [SelectorConfig(method=name) for name in split_list(methods)]
        if not configs:
            raise ValueError("at least one method is required")
        report = sweep(
            require_ensemble(low_ensemble, "low_ensemble"),
            require_ensemble(high_ensemble, "high_ensemble"),
            configs,
            parse_sizes(sizes),
            random_trials=random_trials,
            seed=seed,
            scoring=scoring,
            workers=workers,
            include_rank_k=include_rank_k,
        )
        return (report.to_csv(), report.to_plot_table())


class SubsetOracle:
    """Exhaustive best subset; only feasible for small ensembles."""

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {
                "ensemble": ("ENSEMBLE",),
                "m": ("INT", {"default": 3, "min": 1, "max": 64}),
            },
            "optional": {
                "workers": ("INT", {"default": 1, "min": 1, "max": 64}),
            },
        }

    RETURN_TYPES = ("STRING",)
    RETURN_NAMES = ("oracle_json",)
    FUNCTION = "run"
    CATEGORY = f"{CATEGORY_ROOT}/Analysis"

    def run(self, ensemble: Ensemble, m: int, workers: int = 1) -> Tuple[str]:
        A = require_ensemble(ensemble).snapshots
        result = brute_force_cssp(A, m, workers=workers)
        payload = {
            "indices": [index + 1 for index in result.indices],
            "residual": result.residual,
            "rank_k_error": rank_k_error(A, m) if m <= min(A.shape) else None,
        }
        return (json.dumps(payload, indent=2),)


class RecoveryDiagnosticsNode:
    """Recovery conditions of a hypothesized basis set (1-based indices)."""

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {
                "ensemble": ("ENSEMBLE",),
                "basis_indices": ("STRING", {"default": "1,2,3"}),
            },
            "optional": {
                "sigma": ("FLOAT", {"default": 0.0, "min": 0.0, "step": 1e-6}),
                "eta": ("FLOAT", {"default": 0.1, "min": 0.001, "max": 0.499, "step": 0.01}),
            },
        }

    RETURN_TYPES = ("STRING", "BOOLEAN")
    RETURN_NAMES = ("diagnostics_json", "conditions_met")
    FUNCTION = "run"
    CATEGORY = f"{CATEGORY_ROOT}/Analysis"

    def run(self, ensemble: Ensemble, basis_indices: str, sigma: float = 0.0, eta: float = 0.1) -> Tuple[str, bool]:
        A = require_ensemble(ensemble).snapshots
        basis = parse_index_list(basis_indices, A.shape[1])
        diagnostics = diagnose(A, basis, sigma=sigma, eta=eta)
        if not diagnostics.all_met:
            logger.info("basis %s does not meet the recovery conditions", basis_indices)
        return (diagnostics.to_json(), diagnostics.all_met)
