"""Exception types shared across the package."""


class RobustAmpError(Exception):
    """Base class for package errors."""


class ConfigurationError(RobustAmpError):
    """Invalid specification or configuration value."""


class UnsupportedEnsembleError(RobustAmpError):
    """Operation requires a different matrix ensemble."""


class DivergenceError(RobustAmpError):
    """AMP iteration produced non-finite or exploding values."""

    def __init__(self, message, step=None):
        super().__init__(message)
        self.step = step


class NumericalDegeneracyError(RobustAmpError):
    """A numerical estimate violated a structural requirement (e.g. PSD)."""


class ResourceError(RobustAmpError):
    """Requested computation exceeds a configured resource guard."""


class CalibrationError(RobustAmpError):
    """Monte Carlo calibration could not produce a usable table."""


class DegenerateCorruptionWarning(UserWarning):
    """Corruption request rounds down to an empty support."""
