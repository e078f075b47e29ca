"""Soft-to-hard vector quantization image codec."""

from ._softvq import (
    Codec,
    ConfigError,
    EpochMetrics,
    FormatError,
    Model,
    ModelConfig,
    ModelMismatchError,
    NetConfig,
    NumericError,
    TrainConfig,
    crc32,
    init_model,
    load_model,
    model_from_bytes,
    quantize_model,
    range_decode,
    range_encode,
    synthetic_textures,
    train,
    xent_decomposition,
)

__all__ = [
    "Codec",
    "ConfigError",
    "EpochMetrics",
    "FormatError",
    "Model",
    "ModelConfig",
    "ModelMismatchError",
    "NetConfig",
    "NumericError",
    "TrainConfig",
    "crc32",
    "init_model",
    "load_model",
    "model_from_bytes",
    "quantize_model",
    "range_decode",
    "range_encode",
    "synthetic_textures",
    "train",
    "xent_decomposition",
]
