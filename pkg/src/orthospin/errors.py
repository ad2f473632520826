"""Exception types raised across the package."""


class OrthospinError(Exception):
    """Base class for all package errors."""


class InvalidSizeError(OrthospinError, ValueError):
    """Raised when a system size is outside the allowed range."""


class DimensionError(OrthospinError, ValueError):
    """Raised when a configuration or matrix has the wrong number of spins."""


class CapacityError(OrthospinError, ValueError):
    """Raised when a computation would exceed an enumeration or memory cap."""


class InsufficientMomentsError(OrthospinError, ValueError):
    """Raised when more cumulants are requested than moments were accumulated."""


class DomainError(OrthospinError, ValueError):
    """Raised when a closed-form function is evaluated outside its domain."""


class FitError(OrthospinError, ValueError):
    """Raised when a scaling fit has too few usable points."""
