"""Exception types shared across the package."""


class GeoProError(Exception):
    """Base class for package errors."""


class NumericError(GeoProError, ArithmeticError):
    """Raised when a computation produces non-finite values."""


class DomainError(GeoProError, ValueError):
    """Raised when a query lies outside the domain of a field."""


class ConfigError(GeoProError, ValueError):
    """Raised for invalid scenario or run configuration.

    ``path`` is the dotted location of the offending entry, when known.
    """

    def __init__(self, message, path=None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
