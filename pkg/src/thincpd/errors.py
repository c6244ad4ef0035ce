"""Exception hierarchy shared by every module."""


class ThinCPDError(Exception):
    """Base class for all errors raised by this package."""


class InputError(ThinCPDError, ValueError):
    """Malformed input: bad dimensions, sizes or parameters."""


class DegenerateBandwidthError(InputError):
    """The median pairwise distance is zero, so no bandwidth can be chosen."""


class NumericalError(ThinCPDError, ArithmeticError):
    """A numerical procedure could not produce a usable value."""


class DegenerateCovarianceError(NumericalError):
    """The regularized pooled covariance is not positive definite."""


class CalibrationError(NumericalError):
    """Threshold search or variance-constant estimation failed."""
