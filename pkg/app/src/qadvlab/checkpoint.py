# src/qadvlab/checkpoint.py
"""
Model checkpoints as JSON. Angles are stored as hex-float strings so a
reloaded model reproduces the saved one bit for bit.
"""
from __future__ import annotations

from pathlib import Path
from typing import Any, Dict

import numpy as np
import orjson

from .embeddings import EmbeddingSpec
from .errors import ConfigError
from .model import CircuitParams, ClassifierModel, Measurement

FORMAT_VERSION = 1


def model_to_dict(model: ClassifierModel) -> Dict[str, Any]:
    return {
        "format": FORMAT_VERSION,
        "embedding": model.embedding.model_dump(mode="json"),
        "measurement": model.measurement.value,
        "num_classes": model.num_classes,
        "alpha": model.alpha,
        "gamma": model.gamma,
        "layers": model.params.layers,
        "n_qubits": model.params.n_qubits,
        "angles": [float(a).hex() for a in model.angles.reshape(-1)],
    }


def model_from_dict(data: Dict[str, Any]) -> ClassifierModel:
    if data.get("format") != FORMAT_VERSION:
        raise ConfigError(f"unsupported checkpoint format {data.get('format')!r}")
    try:
        angles = np.array([float.fromhex(a) for a in data["angles"]], dtype=float)
        angles = angles.reshape(int(data["layers"]), int(data["n_qubits"]), 3)
        return ClassifierModel(
            embedding=EmbeddingSpec.model_validate(data["embedding"]),
            params=CircuitParams(angles),
            measurement=Measurement(data["measurement"]),
            num_classes=int(data["num_classes"]),
            alpha=float(data["alpha"]),
            gamma=float(data["gamma"]),
        )
    except (KeyError, TypeError, ValueError) as exc:
        raise ConfigError(f"malformed checkpoint: {exc}") from exc


def save_model(model: ClassifierModel, path: Path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_bytes(orjson.dumps(model_to_dict(model), option=orjson.OPT_INDENT_2))
    return path


def load_model(path: Path) -> ClassifierModel:
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"checkpoint file does not exist: {path}")
    try:
        data = orjson.loads(path.read_bytes())
    except orjson.JSONDecodeError as exc:
        raise ConfigError(f"{path} is not valid JSON: {exc}") from exc
    return model_from_dict(data)
