"""Exception hierarchy shared across the package."""


class SsdpError(Exception):
    """Base class for every error raised by this package."""


class DimensionError(SsdpError, ValueError):
    """Array shapes do not line up."""


class NumericError(SsdpError, ArithmeticError):
    """NaN or infinite values where finite ones are required."""


class ContractError(SsdpError, ValueError):
    """An argument violates an operation's precondition."""


class ConfigError(SsdpError, ValueError):
    """Invalid run configuration. ``field`` names the offending key."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class DataError(SsdpError, OSError):
    """Dataset files are missing or malformed."""


class IdxFormatError(DataError):
    pass


class IdxMagicError(IdxFormatError):
    pass


class IdxLengthError(IdxFormatError):
    pass


class IdxCountMismatchError(IdxFormatError):
    pass


class EmptyReportError(SsdpError, ValueError):
    """A metric had no responsive neurons to report on."""


class ExportError(SsdpError, OSError):
    """Run artifacts could not be written."""
