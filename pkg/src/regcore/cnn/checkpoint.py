"""Self-describing model checkpoints.

A checkpoint is a single JSON file: format tag, version, the full config,
the label order the output units follow, and every tensor as base64 of
little-endian float64 bytes plus its shape. Nothing about it depends on the
producing process, so checkpoints load across runs and machines.
"""

from __future__ import annotations

import base64
import json
from pathlib import Path

import numpy as np

from .config import CnnConfig, CnnParams

FORMAT_TAG = "regcore-cnn-checkpoint"
FORMAT_VERSION = 1


class CheckpointError(ValueError):
    pass


def _encode_array(arr: np.ndarray) -> dict:
    data = np.ascontiguousarray(arr, dtype="<f8")
    return {
        "shape": list(arr.shape),
        "dtype": "<f8",
        "data": base64.b64encode(data.tobytes()).decode("ascii"),
    }


def _decode_array(entry: dict) -> np.ndarray:
    raw = base64.b64decode(entry["data"])
    arr = np.frombuffer(raw, dtype=entry["dtype"]).astype(np.float64)
    return arr.reshape(entry["shape"])


def save_checkpoint(
    path,
    params: CnnParams,
    config: CnnConfig,
    label_order: tuple[str, ...],
    extra: dict | None = None,
) -> None:
    payload = {
        "format": FORMAT_TAG,
        "version": FORMAT_VERSION,
        "config": config.to_dict(),
        "label_order": list(label_order),
        "tensors": {name: _encode_array(t) for name, t in params.tensors().items()},
    }
    if extra:
        payload["extra"] = extra
    Path(path).write_text(json.dumps(payload), encoding="utf-8")


def load_checkpoint(path) -> tuple[CnnParams, CnnConfig, tuple[str, ...]]:
    try:
        payload = json.loads(Path(path).read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise CheckpointError(f"not a checkpoint file: {exc}") from None
    if payload.get("format") != FORMAT_TAG:
        raise CheckpointError(f"unexpected format tag {payload.get('format')!r}")
    if payload.get("version") != FORMAT_VERSION:
        raise CheckpointError(f"unsupported checkpoint version {payload.get('version')!r}")
    config = CnnConfig.from_dict(payload["config"])
    tensors = {name: _decode_array(t) for name, t in payload["tensors"].items()}
    params = CnnParams(
        conv_w=tensors["conv_w"],
        conv_b=tensors["conv_b"],
        out_w=tensors["out_w"],
        out_b=tensors["out_b"],
    )
    return params, config, tuple(payload["label_order"])
