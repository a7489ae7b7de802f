"""Exception types shared across the package."""


class SpinBathError(Exception):
    """Base class for all errors raised by spinbath."""


class InvalidArgument(SpinBathError, ValueError):
    pass


class UnsupportedSize(SpinBathError):
    """Requested instance exceeds a memory or time cap."""


class InsufficientData(SpinBathError):
    """Not enough usable samples for a fit."""


class ConfigError(SpinBathError):
    """Malformed configuration file or conflicting options."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
