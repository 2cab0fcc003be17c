"""Nodes that pick simulation points and fit the bifidelity surrogate."""

from __future__ import annotations

import json
from typing import Tuple

from ..bifidelity import BifidelityModel, Ensemble, fit, high_coefficient_error, pair_errors
from ..selectors import METHOD_NAMES, UINT64_MAX, SelectionResult, SelectorConfig, select
from ._node_utils import CATEGORY_ROOT, coerce_float, optional_positive, require_ensemble


class SubsetSelection:
    """Choose ``m`` columns of a low-fidelity ensemble for high-fidelity runs."""

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {
                "ensemble": ("ENSEMBLE",),
                "method": (list(METHOD_NAMES), {"default": "gomp"}),
                "m": ("INT", {"default": 10, "min": 1, "max": 100000}),
            },
            "optional": {
                "gomp_lambda": ("FLOAT", {"default": 0.0, "min": 0.0, "step": 0.01}),
                "gomp_epsilon": ("FLOAT", {"default": 0.0, "min": 0.0, "step": 1e-6}),
                "leverage_rank": ("INT", {"default": 0, "min": 0, "max": 100000}),
                "seed": ("INT", {"default": 0, "min": 0, "max": UINT64_MAX}),
                "normalize": ("BOOLEAN", {"default": False}),
            },
        }

    RETURN_TYPES = ("SELECTION", "STRING")
    RETURN_NAMES = ("selection", "selection_json")
    FUNCTION = "run"
    CATEGORY = f"{CATEGORY_ROOT}/Selection"

    def run(
        self,
        ensemble: Ensemble,
        method: str,
        m: int,
        gomp_lambda: float = 0.0,
        gomp_epsilon: float = 0.0,
        leverage_rank: int = 0,
        seed: int = 0,
        normalize: bool = False,
    ) -> Tuple[SelectionResult, str]:
        low = require_ensemble(ensemble)
        config = SelectorConfig(
            method=method,
            target_size=m,
            gomp_lambda=optional_positive(gomp_lambda),
            gomp_epsilon=coerce_float(gomp_epsilon) or 0.0,
            leverage_rank=leverage_rank or None,
            rng_seed=seed,
            normalize_columns=normalize,
        )
        result = select(config, ensemble=low.snapshots)
        return (result, json.dumps(result.to_dict(one_based=True), indent=2))


class FitBifidelity:
    """Pair the selected low-fidelity columns with the matching high-fidelity runs."""

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {
                "low_ensemble": ("ENSEMBLE",),
                "high_ensemble": ("ENSEMBLE",),
                "selection": ("SELECTION",),
            },
        }

    RETURN_TYPES = ("BIFIDELITY_MODEL", "STRING")
    RETURN_NAMES = ("model", "summary")
    FUNCTION = "fit"
    CATEGORY = f"{CATEGORY_ROOT}/Selection"

    def fit(self, low_ensemble: Ensemble, high_ensemble: Ensemble, selection: SelectionResult) -> Tuple[BifidelityModel, str]:
        low = require_ensemble(low_ensemble, "low_ensemble")
        high = require_ensemble(high_ensemble, "high_ensemble")
        if not low.same_points(high):
            raise ValueError("low and high ensembles are not defined on the same parameter points")
        indices = selection.ordered_indices
        model = fit(low, high.columns(indices), selection)
        low_error, high_error = pair_errors(low, high, indices, "held_out")
        summary = {
            "indices": [index + 1 for index in indices],
            "low_error": low_error,
            "high_error": high_error,
            "high_coefficient_error": high_coefficient_error(high, indices),
        }
        return (model, json.dumps(summary, indent=2))
