"""Exception types shared across the package."""


class FockLabError(Exception):
    """Base class for all package errors."""


class ConfigError(FockLabError):
    """Invalid or unknown experiment configuration."""


class CapacityError(FockLabError):
    """A requested basis or sector exceeds the configured size bound."""


class TruncationError(FockLabError):
    """Occupation cutoff is too small for the requested state or run."""


class AliasingError(FockLabError):
    """Phase quadrature too coarse for the occupation cutoff."""


class NormalizationError(FockLabError):
    """Input state fails a required normalization precondition."""


class BlowUpError(FockLabError):
    """Time integration left the admissible manifold (mass drift too large)."""


class ConvergenceError(FockLabError):
    """An iterative propagation step failed to reach the requested tolerance."""
