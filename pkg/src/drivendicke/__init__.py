"""Floquet master-equation toolkit for laser-driven emitters in a cavity."""
from .errors import (
    AmbiguousLabelError,
    ConfigError,
    DickeError,
    DimensionError,
    EigensolverError,
    FourierCutoffError,
    NonUniqueStationaryStateError,
    NumericalError,
    PeakNotFoundError,
    QuadratureError,
    UndefinedObservableError,
    UnitarityError,
)
from .model import ModelParams
from .pipeline import Solution, solve

__version__ = "0.1.0"
