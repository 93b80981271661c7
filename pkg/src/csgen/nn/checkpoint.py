"""Checkpoint container: JSON mapping parameter names to shape + row-major values.

Layout (version 1)::

    {"format": "csgen-checkpoint", "version": 1,
     "meta": {...},                       # model kind, config, vocabulary
     "params": {"name": {"shape": [...], "data": [...]}, ...}}

Floats are written with Python's shortest round-trip repr, so load(save(x)) is exact.
"""
from __future__ import annotations

import json
from pathlib import Path

import numpy as np

from ..errors import DataError

FORMAT = "csgen-checkpoint"
VERSION = 1


def dumps(params: dict[str, np.ndarray], meta: dict | None = None) -> str:
    payload = {
        "format": FORMAT,
        "version": VERSION,
        "meta": meta or {},
        "params": {
            k: {"shape": list(v.shape), "data": np.asarray(v, dtype=np.float64).reshape(-1).tolist()}
            for k, v in params.items()
        },
    }
    return json.dumps(payload, ensure_ascii=False)


def loads(text: str) -> tuple[dict[str, np.ndarray], dict]:
    try:
        payload = json.loads(text)
    except json.JSONDecodeError as exc:
        raise DataError(f"checkpoint is not valid JSON: {exc}") from exc
    if payload.get("format") != FORMAT:
        raise DataError("not a csgen checkpoint")
    if payload.get("version") != VERSION:
        raise DataError(f"unsupported checkpoint version {payload.get('version')}")
    params = {}
    for k, entry in payload["params"].items():
        arr = np.asarray(entry["data"], dtype=np.float64)
        shape = tuple(entry["shape"])
        if arr.size != int(np.prod(shape)):
            raise DataError(f"checkpoint entry {k}: data length does not match shape {shape}")
        params[k] = arr.reshape(shape)
    return params, payload.get("meta", {})


def save(path: str | Path, params: dict[str, np.ndarray], meta: dict | None = None) -> None:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(dumps(params, meta), encoding="utf-8")


def load(path: str | Path) -> tuple[dict[str, np.ndarray], dict]:
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise DataError(f"cannot read checkpoint {path}: {exc.strerror or exc}") from exc
    return loads(text)
