"""Run configuration shared by the ``sweep`` and ``generate`` commands."""

from __future__ import annotations

import json
import os
from typing import List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from .models import ModelName, ParameterGrid
from .selectors import METHOD_NAMES, SelectorConfig, UINT64_MAX


def default_methods() -> List[SelectorConfig]:
    return [SelectorConfig(method=name) for name in METHOD_NAMES]


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    model: Optional[ModelName] = None
    grid: Optional[ParameterGrid] = None
    methods: List[SelectorConfig] = Field(default_factory=default_methods)
    sizes: List[int] = Field(default_factory=lambda: list(range(1, 21)))
    random_trials: int = Field(default=100, ge=1)
    scoring: Literal["held_out", "all"] = "held_out"
    include_rank_k: bool = False
    workers: int = Field(default=1, ge=1)
    seed: int = Field(default=0, ge=0, le=UINT64_MAX)
    low_path: Optional[str] = None
    high_path: Optional[str] = None
    out: Optional[str] = None
    plot_data: Optional[str] = None

    @field_validator("methods", mode="before")
    @classmethod
    def _expand_method_names(cls, value):
        # "gomp" is shorthand for {"method": "gomp"}
        if isinstance(value, list):
            return [{"method": item} if isinstance(item, str) else item for item in value]
        return value

    @field_validator("sizes")
    @classmethod
    def _sizes_ascending(cls, value: List[int]) -> List[int]:
        if not value:
            raise ValueError("sizes must not be empty")
        if any(size < 1 for size in value):
            raise ValueError(f"sizes must be positive, got {value}")
        if any(b <= a for a, b in zip(value, value[1:])):
            raise ValueError(f"sizes must be strictly ascending, got {value}")
        return value


def parse_index_list(text: str, n: int) -> List[int]:
    """Parse 1-based indices separated by commas or whitespace into 0-based ones."""

    tokens = [token for token in text.replace(",", " ").split() if token]
    if not tokens:
        raise ValueError("index list is empty")
    try:
        one_based = [int(token) for token in tokens]
    except ValueError as exc:
        raise ValueError(f"index list '{text}' must contain integers: {exc}") from exc
    if any(index < 1 or index > n for index in one_based):
        raise ValueError(f"indices are 1-based and must lie in [1, {n}], got {one_based}")
    if len(set(one_based)) != len(one_based):
        raise ValueError(f"indices must be distinct, got {one_based}")
    return [index - 1 for index in one_based]


def load_run_config(path: str) -> RunConfig:
    """Read a JSON run configuration; errors name the file."""

    if not os.path.exists(path):
        raise ValueError(f"run configuration '{path}' does not exist")

    try:
        with open(path, "r", encoding="utf-8") as file:
            data = json.load(file)
    except json.JSONDecodeError as exc:
        raise ValueError(f"run configuration '{path}' is not valid JSON: {exc}") from exc

    if not isinstance(data, dict):
        raise ValueError(f"run configuration '{path}' must be a JSON object")

    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ValueError(f"run configuration '{path}' is invalid:\n{exc}") from exc
