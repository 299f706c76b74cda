"""Exception types shared across the package."""


class HsbError(Exception):
    """Base class for all package-specific errors."""


class DomainError(HsbError, ValueError):
    """An argument value is outside its mathematical domain."""


class ShapeError(HsbError, ValueError):
    """Array/sequence inputs have inconsistent shapes or lengths."""


class ConfigError(HsbError, ValueError):
    """A configuration value or combination of values is invalid."""


class ProtocolError(HsbError, RuntimeError):
    """Select/update calls were made out of order or reused."""


class CapacityError(HsbError, RuntimeError):
    """An enumeration or construction would exceed its hard cap."""


class SnapshotFormatError(HsbError, ValueError):
    """A snapshot blob is corrupt or from an incompatible layout."""


class LogParseError(HsbError, ValueError):
    """A logged-interaction file failed to parse.

    Carries the 1-based line number of the offending row.
    """

    def __init__(self, message, line_number=None):
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number
