"""Grade-by-grade training of deep networks (Python bindings)."""

from ._multigrade import (
    ConfigError,
    DomainError,
    IoError,
    Model,
    MultigradeError,
    ShapeError,
    TrainingError,
    UsageError,
    eval_target,
    generate,
    run_experiment,
    split_error,
    validate_config,
)

__all__ = [
    "ConfigError",
    "DomainError",
    "IoError",
    "Model",
    "MultigradeError",
    "ShapeError",
    "TrainingError",
    "UsageError",
    "eval_target",
    "generate",
    "run_experiment",
    "split_error",
    "validate_config",
]
