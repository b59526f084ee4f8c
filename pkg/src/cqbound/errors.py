"""Exception hierarchy shared across the package."""


class CQBoundError(Exception):
    """Base class for all errors raised by this package."""


class InputError(CQBoundError):
    """Malformed input: bad query text, bad database file, broken invariants."""


class ParseError(InputError):
    """Syntax error in a query file, with source position."""

    def __init__(self, message, line=None, column=None):
        self.line = line
        self.column = column
        if line is not None:
            message = f"line {line}" + (f", col {column}" if column is not None else "") + f": {message}"
        super().__init__(message)


class LimitError(CQBoundError):
    """Analysis refused because it would exceed a configured size limit."""
