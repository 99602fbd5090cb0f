"""Bound spectrum and semiclassical analysis of the quartic double well."""
from .errors import (
    AnalysisError,
    BranchOverflowError,
    DataIntegrityError,
    DomainError,
    DoubleWellError,
    NumericError,
    SeparatrixError,
)
from .model import (
    CRITICAL_ENERGY,
    EnergyLevel,
    Method,
    Parity,
    PotentialParams,
    Spectrum,
    derived_constants,
    potential,
)

__version__ = "0.1.0"

__all__ = [
    "AnalysisError",
    "BranchOverflowError",
    "CRITICAL_ENERGY",
    "DataIntegrityError",
    "DomainError",
    "DoubleWellError",
    "EnergyLevel",
    "Method",
    "NumericError",
    "Parity",
    "PotentialParams",
    "SeparatrixError",
    "Spectrum",
    "derived_constants",
    "potential",
]
