"""Exception types shared across the package."""


class EdiError(Exception):
    """Base class for all errors raised by this package."""


class InvalidThresholdError(EdiError, ValueError):
    """Contrast threshold c must be strictly positive."""


class InvalidWindowError(EdiError, ValueError):
    """Exposure or integration window is degenerate (duration <= 0)."""


class CoverageError(EdiError, ValueError):
    """Event stream does not cover the requested time interval."""


class OutOfBoundsError(EdiError, ValueError):
    """Event coordinates fall outside the sensor bounds."""


class DimensionMismatchError(EdiError, ValueError):
    """Two grids that must share a shape do not."""


class OptimizationError(EdiError, RuntimeError):
    """Threshold search could not produce a finite minimizer."""


class EventFormatError(EdiError, ValueError):
    """Malformed event file; carries the offending line number."""

    def __init__(self, message: str, line_number: int | None = None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number


class ManifestError(EdiError, ValueError):
    """Malformed frames manifest or missing referenced image."""
