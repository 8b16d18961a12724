"""Exception types raised by the splinefit package."""


class SplinefitError(Exception):
    """Base class for all package errors."""


class ConfigurationError(SplinefitError, ValueError):
    """Invalid configuration: bad degrees, shapes, missing options, unknown keys."""


class ParseError(SplinefitError, ValueError):
    """Malformed input file. Carries the offending line number when known."""

    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InsufficientPointsError(SplinefitError, ValueError):
    """Too few points for the requested operation."""


class DegenerateParameterizationError(SplinefitError, ValueError):
    """Chord-length parameterization collapsed (repeated parameters)."""


class SingularSystemError(SplinefitError, ValueError):
    """Least-squares system is rank deficient and unregularized."""


class DegenerateNormalError(SplinefitError, ValueError):
    """Surface tangents are (numerically) parallel; no normal direction."""


class DegenerateNeighborhoodError(SplinefitError, ValueError):
    """A point neighborhood has no spatial extent; PCA normal undefined."""


class EmptyPredictionError(SplinefitError, ValueError):
    """Predicted control-point matrix has no active rows or columns."""
