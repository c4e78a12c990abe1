"""Exception hierarchy shared across the package."""


class AsepmixError(Exception):
    """Base class for all package-specific errors."""


class InvalidInputError(AsepmixError):
    """Arguments violate a documented precondition (mismatched intervals, bad tags, ...)."""


class UnsupportedSizeError(AsepmixError):
    """Problem size exceeds what an exact routine is willing to enumerate."""


class UnsupportedWindowError(AsepmixError):
    """A lattice window is too small for the requested observable."""


class UnsupportedRangeError(AsepmixError):
    """Numerical evaluation requested outside the supported argument range."""


class NumericalFailureError(AsepmixError):
    """A solver failed to converge; carries diagnostics in the message."""


class ConfigurationError(AsepmixError):
    """Run configuration is missing or has an invalid key."""
