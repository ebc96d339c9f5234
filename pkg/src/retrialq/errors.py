"""Exception hierarchy shared by the library and the command-line front end."""


class RetrialError(Exception):
    """Base class for all errors raised by retrialq."""


class DomainError(RetrialError, ValueError):
    """An argument lies outside the domain of an operation."""


class ConfigError(RetrialError, ValueError):
    """A run configuration is malformed or incomplete."""


class StabilityError(RetrialError):
    """The queue is unstable (rho >= 1) or a geometric scale is >= 1."""


class NumericalError(RetrialError, ArithmeticError):
    """A numerical procedure failed to converge or produced invalid output."""


class TruncationMismatchError(RetrialError, ValueError):
    """Two series with different truncation orders were combined."""


class UnsupportedModelError(RetrialError):
    """The model falls outside the regularly varying regime (both laws light)."""


class InfiniteMeanError(UnsupportedModelError):
    """A tail index is <= 1, so the corresponding mean is infinite."""
