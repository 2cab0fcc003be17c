"""Portable ensemble files.

Layout: the magic bytes ``MFA1``, a compact UTF-8 JSON manifest, one newline,
then ``rows * cols`` little-endian float64 values in column-major order.
"""

from __future__ import annotations

import hashlib
import json
import logging
import os
from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional

import numpy as np

from .bifidelity import Ensemble

logger = logging.getLogger(__name__)

MAGIC = b"MFA1"
FORMAT_VERSION = 1
PAYLOAD_DTYPE = np.dtype("<f8")


class EnsembleFileError(ValueError):
    def __init__(self, path: str, detail: str):
        super().__init__(f"{path}: {detail}")
        self.path = path


@dataclass(frozen=True)
class EnsembleFile:
    ensemble: Ensemble
    grid: Optional[Dict[str, Any]] = None
    seed: Optional[int] = None
    config_hash: str = ""
    planted_basis: Optional[List[int]] = field(default=None)


def config_hash(payload: Dict[str, Any]) -> str:
    canonical = json.dumps(payload, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode("utf-8")).hexdigest()


def encode_ensemble(
    ensemble: Ensemble,
    grid: Optional[Dict[str, Any]] = None,
    seed: Optional[int] = None,
    planted_basis: Optional[List[int]] = None,
) -> bytes:
    """Serialize ``ensemble``; ``planted_basis`` is stored 1-based as given."""

    rows, cols = ensemble.snapshots.shape
    identity = {"model_id": ensemble.model_id, "fidelity": ensemble.fidelity_label, "grid": grid, "seed": seed}
    manifest: Dict[str, Any] = {
        "format_version": FORMAT_VERSION,
        "model_id": ensemble.model_id,
        "fidelity": ensemble.fidelity_label,
        "rows": rows,
        "cols": cols,
        "parameters": ensemble.parameters.tolist(),
        "grid": grid,
        "seed": seed,
        "config_hash": config_hash(identity),
    }
    if planted_basis is not None:
        manifest["planted_basis"] = [int(i) for i in planted_basis]

    header = json.dumps(manifest, sort_keys=True, separators=(",", ":"), allow_nan=False)
    payload = np.asarray(ensemble.snapshots, dtype=PAYLOAD_DTYPE).tobytes(order="F")
    return MAGIC + header.encode("utf-8") + b"\n" + payload


def save_ensemble(path: str, ensemble: Ensemble, **manifest_fields) -> str:
    data = encode_ensemble(ensemble, **manifest_fields)
    directory = os.path.dirname(os.path.abspath(path))
    os.makedirs(directory, exist_ok=True)
    with open(path, "wb") as file:
        file.write(data)
    logger.info("wrote %s (%d x %d)", path, *ensemble.snapshots.shape)
    return path


def decode_ensemble(data: bytes, path: str = "<bytes>") -> EnsembleFile:
    if not data.startswith(MAGIC):
        raise EnsembleFileError(path, "missing MFA1 magic prefix")
    end = data.find(b"\n", len(MAGIC))
    if end < 0:
        raise EnsembleFileError(path, "manifest is not terminated by a newline")

    try:
        manifest = json.loads(data[len(MAGIC) : end].decode("utf-8"))
    except (UnicodeDecodeError, json.JSONDecodeError) as exc:
        raise EnsembleFileError(path, f"manifest is not valid JSON: {exc}") from exc
    if not isinstance(manifest, dict):
        raise EnsembleFileError(path, "manifest must be a JSON object")

    try:
        rows, cols = int(manifest["rows"]), int(manifest["cols"])
        parameters = manifest["parameters"]
    except (KeyError, TypeError, ValueError) as exc:
        raise EnsembleFileError(path, f"manifest field missing or invalid: {exc}") from exc
    if manifest.get("format_version", FORMAT_VERSION) != FORMAT_VERSION:
        raise EnsembleFileError(path, f"unsupported format_version {manifest.get('format_version')}")

    payload = data[end + 1 :]
    expected = PAYLOAD_DTYPE.itemsize * rows * cols
    if len(payload) != expected:
        raise EnsembleFileError(path, f"payload has {len(payload)} bytes, manifest implies {expected}")

    values = np.frombuffer(payload, dtype=PAYLOAD_DTYPE).reshape((rows, cols), order="F")
    try:
        ensemble = Ensemble(
            snapshots=values.astype(np.float64),
            parameters=np.asarray(parameters, dtype=np.float64),
            fidelity_label=str(manifest.get("fidelity", "")),
            model_id=str(manifest.get("model_id", "")),
        )
    except ValueError as exc:
        raise EnsembleFileError(path, str(exc)) from exc

    return EnsembleFile(
        ensemble=ensemble,
        grid=manifest.get("grid"),
        seed=manifest.get("seed"),
        config_hash=str(manifest.get("config_hash", "")),
        planted_basis=manifest.get("planted_basis"),
    )


def load_ensemble(path: str) -> EnsembleFile:
    try:
        with open(path, "rb") as file:
            data = file.read()
    except OSError as exc:
        raise EnsembleFileError(path, f"cannot read file: {exc.strerror or exc}") from exc
    return decode_ensemble(data, path)
