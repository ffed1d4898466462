"""One-shot magnitude pruning with renormalization, plus numerical checks of
the random-feature error bounds that motivate it."""

from prunebench.errors import (
    ConsistencyError,
    DataError,
    DimensionError,
    DomainError,
    EmptyNetworkError,
    FormatError,
    IntegrityError,
    LengthError,
    PruneBenchError,
    TrainingDivergedError,
)

__version__ = "0.1.0"

__all__ = [
    "ConsistencyError",
    "DataError",
    "DimensionError",
    "DomainError",
    "EmptyNetworkError",
    "FormatError",
    "IntegrityError",
    "LengthError",
    "PruneBenchError",
    "TrainingDivergedError",
]
