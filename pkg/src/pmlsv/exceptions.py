"""Exception types raised by the package."""


class PmlsvError(Exception):
    """Base class for all errors raised by pmlsv."""


class DimensionError(PmlsvError, ValueError):
    """Shapes of the arguments do not agree."""


class SvdConvergenceError(PmlsvError):
    """The SVD failed to converge with every available LAPACK driver."""


class DegenerateIterateError(PmlsvError):
    """An iterate has zero (or non-finite) total intensity and cannot be projected."""


class UnidentifiableSignalError(PmlsvError):
    """All photon counts are zero, so no estimate can be formed."""


class ConfigError(PmlsvError, ValueError):
    """Invalid configuration value."""
