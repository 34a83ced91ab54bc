"""Exception hierarchy.

Configuration problems and numerical failures are kept apart so the CLI can
map them onto distinct exit codes.
"""


class DickeError(Exception):
    """Base class for all errors raised by this package."""


class ConfigError(DickeError, ValueError):
    """Invalid parameters or configuration input."""


class NumericalError(DickeError, ArithmeticError):
    """A numerical procedure failed or produced an untrustworthy result."""


class DimensionError(ConfigError):
    pass


class FourierCutoffError(NumericalError):
    """Floquet states carry too much weight outside the retained Fourier window."""


class UnitarityError(NumericalError):
    pass


class EigensolverError(NumericalError):
    pass


class AmbiguousLabelError(NumericalError):
    pass


class NonUniqueStationaryStateError(NumericalError):
    """The Pauli generator has more than one closed class of states."""


class QuadratureError(NumericalError):
    pass


class UndefinedObservableError(NumericalError):
    """Raised e.g. when g2 is requested for a system that emits no light."""


class PeakNotFoundError(NumericalError):
    pass
