"""Exception hierarchy shared by every module."""


class KsdError(Exception):
    """Base class for all errors raised by ksdgof."""


class InvalidInputError(KsdError, ValueError):
    """Shapes, ranges or option values that violate an operation's preconditions."""


class NumericalError(KsdError, ArithmeticError):
    """Non-finite intermediate values, underflow or solver failure."""


class CapacityError(KsdError):
    """The requested computation exceeds a configured size bound."""


class UnsupportedOperationError(KsdError):
    """The model or method does not provide the requested capability."""


class DegenerateSampleError(InvalidInputError):
    """The sample carries no usable spread (e.g. all points identical)."""


class ParseError(InvalidInputError):
    """Malformed sample, model or configuration file."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
