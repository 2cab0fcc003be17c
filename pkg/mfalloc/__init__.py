"""Multifidelity simulation allocation: pick the parameter points worth a high-fidelity run."""

from .bifidelity import (
    BifidelityModel,
    Ensemble,
    ErrorReport,
    ErrorRow,
    coefficients,
    evaluate_error,
    fit,
    reconstruct_ensemble,
    reconstruct_high,
    sweep,
)
from .linalg import gram, projection_residual, pseudoinverse, rank_k_error, svd
from .selectors import Method, SelectionResult, SelectorConfig, Termination, select
from .theory import RecoveryDiagnostics, brute_force_cssp, diagnose

__all__ = [
    "BifidelityModel",
    "Ensemble",
    "ErrorReport",
    "ErrorRow",
    "Method",
    "RecoveryDiagnostics",
    "SelectionResult",
    "SelectorConfig",
    "Termination",
    "brute_force_cssp",
    "coefficients",
    "diagnose",
    "evaluate_error",
    "fit",
    "gram",
    "projection_residual",
    "pseudoinverse",
    "rank_k_error",
    "reconstruct_ensemble",
    "reconstruct_high",
    "select",
    "svd",
    "sweep",
]
