"""JSON model files.

Weights are stored row-major as flat decimal lists next to their shape.
Python's float repr is the shortest string that parses back to the same
double, so a save/load round trip is bit-exact.
"""

from __future__ import annotations

import json
import os
from pathlib import Path

import numpy as np

from ..errors import ConfigError, FormatError, ShapeMismatch, VersionMismatch
from .model import EncoderDecoderModel, ModelConfig
from .norm import NormParams

FORMAT_VERSION = 1


def model_to_dict(model: EncoderDecoderModel) -> dict:
    return {
        "format_version": FORMAT_VERSION,
        "role": model.role,
        "config": model.config.to_dict(),
        "norm": model.norm.to_dict(),
        "weights": {
            k: {"shape": list(v.shape), "data": [float(x) for x in v.ravel(order="C")]}
            for k, v in model.params.items()
        },
    }


def model_from_dict(doc: dict) -> EncoderDecoderModel:
    if not isinstance(doc, dict) or "format_version" not in doc:
        raise FormatError("not a model document")
    if doc["format_version"] != FORMAT_VERSION:
        raise VersionMismatch(f"format_version {doc['format_version']} unsupported (expected {FORMAT_VERSION})")
    try:
        config = ModelConfig.from_dict(doc["config"])
        if doc["role"] != config.role:
            raise FormatError(f"role tag {doc['role']!r} disagrees with config role {config.role!r}")
        norm = NormParams.from_dict(doc["norm"])
        params = {
            k: np.array(w["data"], dtype=float).reshape(w["shape"])
            for k, w in doc["weights"].items()
        }
        return EncoderDecoderModel(config, params, norm)
    except (KeyError, TypeError, ValueError, ConfigError, ShapeMismatch) as exc:
        if isinstance(exc, FormatError):
            raise
        raise FormatError(f"malformed model document: {exc}") from None


def dumps_model(model: EncoderDecoderModel) -> str:
    return json.dumps(model_to_dict(model)) + "\n"


def save_model(model: EncoderDecoderModel, destination: str | os.PathLike) -> None:
    Path(destination).write_text(dumps_model(model), encoding="utf-8")


def load_model(source: str | os.PathLike) -> EncoderDecoderModel:
    text = Path(source).read_text(encoding="utf-8")
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise FormatError(f"{source}: not valid JSON ({exc.msg})") from None
    return model_from_dict(doc)
