"""Exception hierarchy shared by the library and the command line frontend."""


class SwellCPError(Exception):
    """Base class for all errors raised by this package."""

    exit_code = 1


class SchemaError(SwellCPError, ValueError):
    """Input data does not match the expected column schema."""

    exit_code = 2


class RowError(SchemaError):
    """A single data row could not be parsed.

    ``row`` is the 1-based data row number (the header is row 0).
    """

    def __init__(self, row, message):
        self.row = row
        super().__init__(f"row {row}: {message}")


class ConfigError(SwellCPError, ValueError):
    exit_code = 3


class StateError(SwellCPError, RuntimeError):
    """An operation was requested on an object that is not ready for it,
    e.g. predicting intervals from a model that was never calibrated."""

    exit_code = 4
