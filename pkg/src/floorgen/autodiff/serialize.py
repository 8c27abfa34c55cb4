"""Checkpoint files: a version-tagged JSON map of parameter name to values."""

from __future__ import annotations

import base64
import json
from pathlib import Path
from typing import Union

import numpy as np

FORMAT = "floorgen-checkpoint"
VERSION = 1


def encode_array(a: np.ndarray) -> dict:
    # np.ascontiguousarray would turn 0-d arrays into 1-d ones
    a = np.array(a, dtype="<f8", order="C")
    return {"shape": list(a.shape), "base64": base64.b64encode(a.tobytes()).decode("ascii")}


def decode_array(entry: dict) -> np.ndarray:
    shape = tuple(entry["shape"])
    if "base64" in entry:
        raw = base64.b64decode(entry["base64"])
        return np.frombuffer(raw, dtype="<f8").reshape(shape).astype(np.float64)
    return np.asarray(entry["values"], dtype=np.float64).reshape(shape)


def dumps_state(state: dict[str, np.ndarray], meta: dict | None = None) -> str:
    doc = {
        "format": FORMAT,
        "version": VERSION,
        "meta": meta or {},
        "params": {name: encode_array(value) for name, value in state.items()},
    }
    return json.dumps(doc, sort_keys=True)


def loads_state(text: str) -> tuple[dict[str, np.ndarray], dict]:
    doc = json.loads(text)
    if doc.get("format") != FORMAT:
        raise ValueError(f"not a checkpoint file (format={doc.get('format')!r})")
    if doc.get("version") != VERSION:
        raise ValueError(f"unsupported checkpoint version {doc.get('version')!r}")
    return {name: decode_array(entry) for name, entry in doc["params"].items()}, doc.get("meta", {})


def save_checkpoint(path: Union[str, Path], state: dict[str, np.ndarray], meta: dict | None = None) -> None:
    Path(path).write_text(dumps_state(state, meta))


def load_checkpoint(path: Union[str, Path]) -> tuple[dict[str, np.ndarray], dict]:
    return loads_state(Path(path).read_text())
