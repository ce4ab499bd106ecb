"""KMLP tabular classifier bindings."""

from ._core import (
    ColumnKind,
    FeatureTable,
    KmlpConfig,
    KmlpError,
    KmlpModel,
    Mode,
    build,
    io,
    metrics,
    preprocess,
    spline,
    train,
    verify,
)

__all__ = [
    "ColumnKind",
    "FeatureTable",
    "KmlpConfig",
    "KmlpError",
    "KmlpModel",
    "Mode",
    "build",
    "io",
    "metrics",
    "preprocess",
    "spline",
    "train",
    "verify",
]
