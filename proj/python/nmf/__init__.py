"""Dual external-memory action sequence forecaster."""

import json

from ._core import (
    ConfigError,
    ContractError,
    DimensionError,
    Error,
    EvaluationError,
    Forecaster as _Forecaster,
    FormatError,
    NumericalError,
    ProtocolError,
    Sample,
    TrainingError,
    corrupt_labels,
    frame_accuracy,
    generate_corpus,
    gradcheck,
    read_features,
    read_labels,
    windows,
    write_features,
    write_labels,
)

VARIANTS = ("a", "b", "c", "d", "e", "full")


def Forecaster(variant, num_classes, feature_dim, config=None, seed=0):
    """Build a model. ``config`` may be a dict or a JSON string with the
    same sections the command-line tool reads (model, train, ...)."""
    if isinstance(config, dict):
        config = json.dumps(config)
    return _Forecaster(variant, num_classes, feature_dim, config or "", seed)


__all__ = [
    "ConfigError",
    "ContractError",
    "DimensionError",
    "Error",
    "EvaluationError",
    "Forecaster",
    "FormatError",
    "NumericalError",
    "ProtocolError",
    "Sample",
    "TrainingError",
    "VARIANTS",
    "corrupt_labels",
    "frame_accuracy",
    "generate_corpus",
    "gradcheck",
    "read_features",
    "read_labels",
    "windows",
    "write_features",
    "write_labels",
]
