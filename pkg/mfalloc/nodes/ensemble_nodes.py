"""Nodes that build, load and save snapshot ensembles."""

from __future__ import annotations

from typing import Tuple

from ..bifidelity import Ensemble
from ..ensemble_io import load_ensemble, save_ensemble
from ..models import (
    DEFAULT_GRIDS,
    GridAxis,
    ModelName,
    ParameterGrid,
    build_ensemble,
)
from ._node_utils import CATEGORY_ROOT, require_ensemble


class BuildEnsemble:
    """Evaluate a built-in model over a tensor parameter grid."""

    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {
                "model": ([m.value for m in ModelName], {"default": "burgers"}),
                "fidelity": (["low", "high"], {"default": "low"}),
                "first_axis_count": ("INT", {"default": 20, "min": 1, "max": 200}),
                "second_axis_count": ("INT", {"default": 20, "min": 1, "max": 200}),
                "workers": ("INT", {"default": 1, "min": 1, "max": 64}),
            },
        }

    RETURN_TYPES = ("ENSEMBLE", "STRING")
    RETURN_NAMES = ("ensemble", "summary")
    FUNCTION = "build"
    CATEGORY = f"{CATEGORY_ROOT}/Ensembles"

    def build(
        self, model: str, fidelity: str, first_axis_count: int, second_axis_count: int, workers: int
    ) -> Tuple[Ensemble, str]:
        default = DEFAULT_GRIDS[ModelName(model)]()
        counts = (first_axis_count, second_axis_count)
        grid = ParameterGrid(
            axes=tuple(GridAxis(**{**axis.model_dump(), "count": count}) for axis, count in zip(default.axes, counts))
        )
        ensemble = build_ensemble(model, grid, fidelity, workers=workers)
        summary = f"{model}/{fidelity}: {ensemble.dim} x {ensemble.n_points}"
        return (ensemble, summary)


class LoadEnsemble:
    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {
                "path": ("STRING", {"default": "", "placeholder": "path/to/ensemble.mfa"}),
            },
        }

    RETURN_TYPES = ("ENSEMBLE", "STRING")
    RETURN_NAMES = ("ensemble", "planted_basis")
    FUNCTION = "load"
    CATEGORY = f"{CATEGORY_ROOT}/Ensembles"

    def load(self, path: str) -> Tuple[Ensemble, str]:
        if not path or not path.strip():
            raise ValueError("path is required")
        loaded = load_ensemble(path.strip())
        planted = ",".join(str(index) for index in loaded.planted_basis or [])
        return (loaded.ensemble, planted)


class SaveEnsemble:
    @classmethod
    def INPUT_TYPES(cls):
        return {
            "required": {
                "ensemble": ("ENSEMBLE",),
                "path": ("STRING", {"default": "ensemble.mfa"}),
            },
        }

    RETURN_TYPES = ("STRING",)
    RETURN_NAMES = ("path",)
    FUNCTION = "save"
    CATEGORY = f"{CATEGORY_ROOT}/Ensembles"
    OUTPUT_NODE = True

    def save(self, ensemble: Ensemble, path: str) -> Tuple[str]:
        if not path or not path.strip():
            raise ValueError("path is required")
        return (save_ensemble(path.strip(), require_ensemble(ensemble)),)
