class TurnkitError(Exception):
    """Base class for all package errors."""


class InsufficientDataError(TurnkitError, ValueError):
    pass


class SchemaError(TurnkitError, ValueError):
    """CSV header does not match the expected schema."""

    def __init__(self, message, missing=()):
        super().__init__(message)
        self.missing = tuple(missing)


class ParseError(TurnkitError, ValueError):
    """A cell could not be parsed; ``row`` is the 1-based data row number."""

    def __init__(self, message, row=None):
        super().__init__(message)
        self.row = row


class OrderingError(TurnkitError, ValueError):
    pass
