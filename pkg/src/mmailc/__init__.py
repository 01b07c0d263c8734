"""Adaptive iterative learning control with single and multiple estimation models."""

__version__ = "0.1.0"

from mmailc.errors import (
    ConfigError,
    ContractViolation,
    HorizonError,
    InvariantViolation,
)

__all__ = [
    "__version__",
    "ConfigError",
    "ContractViolation",
    "HorizonError",
    "InvariantViolation",
]
