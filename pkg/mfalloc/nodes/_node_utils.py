"""Input coercion shared by the mfalloc nodes."""

from __future__ import annotations

from typing import Any, List, Optional

from ..bifidelity import Ensemble

CATEGORY_ROOT = "MFAlloc"


def coerce_int(value: Any) -> Optional[int]:
    if isinstance(value, bool):
        return int(value)
    if isinstance(value, int):
        return value
    if isinstance(value, float):
        return int(value)
    if isinstance(value, str):
        try:
            return int(value.strip())
        except ValueError:
            return None
    return None


def coerce_float(value: Any) -> Optional[float]:
    if isinstance(value, bool):
        return float(value)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        try:
            return float(value.strip())
        except ValueError:
            return None
    return None


def optional_positive(value: Any) -> Optional[float]:
    """Node widgets use 0 for "not set"."""

    number = coerce_float(value)
    if number is None or number <= 0:
        return None
    return number


def split_list(text: str) -> List[str]:
    return [token for token in text.replace(",", " ").split() if token]


def parse_sizes(text: str) -> List[int]:
    sizes = []
    for token in split_list(text):
        size = coerce_int(token)
        if size is None:
            raise ValueError(f"subset size '{token}' is not an integer")
        sizes.append(size)
    if not sizes:
        raise ValueError("at least one subset size is required")
    return sizes


def require_ensemble(value: Any, name: str = "ensemble") -> Ensemble:
    if not isinstance(value, Ensemble):
        raise ValueError(f"{name} must be an ENSEMBLE, got {type(value).__name__}")
    return value
