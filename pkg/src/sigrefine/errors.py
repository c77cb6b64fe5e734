"""Exception hierarchy shared across the package."""


class SigrefineError(Exception):
    pass


class ParseError(SigrefineError, ValueError):
    """Malformed functor term or coalgebra body.

    ``line`` and ``column`` are 1-based; ``line`` is None when the text has
    no line structure (a bare functor term passed programmatically).
    """

    def __init__(self, message, line=None, column=None):
        self.message = message
        self.line = line
        self.column = column
        where = []
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = f"{', '.join(where)}: " if where else ""
        super().__init__(prefix + message)


class MonoidOverflow(SigrefineError, ArithmeticError):
    """Checked 64-bit monoid arithmetic left its range."""


class SignatureError(SigrefineError):
    """Encoded data inconsistent with the functor layout."""


class ProtocolError(SigrefineError):
    """A distributed worker saw a message that violates the protocol."""
