"""Exception types raised across the package."""


class AMKLError(Exception):
    """Base class for all package errors."""


class InvalidArgumentError(AMKLError, ValueError):
    pass


class NumericFailureError(AMKLError, ArithmeticError):
    pass


class CapacityError(AMKLError):
    """A requested collection would exceed its configured size cap."""


class InvariantViolationError(AMKLError):
    pass


class LabelingError(AMKLError):
    """The label oracle failed to produce a label when one was requested."""


class DataError(AMKLError):
    """Malformed or unusable dataset content.

    ``row`` carries the 0-based data row index when the failure can be
    attributed to a single row.
    """

    def __init__(self, message, row=None):
        super().__init__(message if row is None else f"row {row}: {message}")
        self.row = row


class ConfigError(AMKLError, ValueError):
    pass
