"""Versioned model checkpoints with exact value round-trips.

All floating-point payloads are written as hexadecimal float literals,
so save -> load -> save is byte-identical and training can resume from
the precise state.  Structure and key order are canonical (sorted keys,
fixed separators).
"""

import json
from pathlib import Path

import numpy as np

from .errors import CheckpointError

FORMAT_VERSION = 1


def _encode_array(arr: np.ndarray) -> dict:
    flat = np.asarray(arr, dtype=np.float64).ravel()
    return {"shape": list(arr.shape), "hex": [v.hex() for v in flat.tolist()]}


def _decode_array(obj: dict) -> np.ndarray:
    vals = np.array([float.fromhex(h) for h in obj["hex"]], dtype=np.float64)
    return vals.reshape(obj["shape"])


def save_checkpoint(path, *, config_dict: dict, seed: int, epoch: int,
                    arrays: dict[str, np.ndarray], meta: dict | None = None) -> None:
    payload = {
        "format_version": FORMAT_VERSION,
        "seed": seed,
        "epoch": epoch,
        "config": config_dict,
        "meta": meta or {},
        "arrays": {name: _encode_array(arr) for name, arr in arrays.items()},
    }
    Path(path).write_text(json.dumps(payload, sort_keys=True,
                                     separators=(",", ":")))


def load_checkpoint(path) -> dict:
    """Returns the payload with arrays decoded back to float64 ndarrays."""
    try:
        payload = json.loads(Path(path).read_text())
    except (OSError, json.JSONDecodeError) as exc:
        raise CheckpointError(f"cannot read checkpoint {path}: {exc}") from exc
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise CheckpointError(
            f"checkpoint {path} has format version {version!r}, "
            f"this build reads {FORMAT_VERSION}")
    try:
        payload["arrays"] = {name: _decode_array(obj)
                             for name, obj in payload["arrays"].items()}
    except (KeyError, ValueError, TypeError) as exc:
        raise CheckpointError(f"corrupt array block in {path}: {exc}") from exc
    return payload
