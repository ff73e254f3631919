"""Exception hierarchy shared across the package."""


class RsvpError(Exception):
    """Base class for all errors raised by rsvpipe."""


class DegenerateInputError(RsvpError, ValueError):
    pass


class DataError(RsvpError, ValueError):
    """Non-finite or otherwise unusable numeric input."""


class NumericError(RsvpError, ArithmeticError):
    pass


class DefinitenessError(NumericError):
    """A matrix required to be positive definite is not."""


class ParameterError(RsvpError, ValueError):
    pass


class EmptySetError(RsvpError, ValueError):
    pass


class ClassCollapseError(RsvpError, ValueError):
    """Every epoch of one class was removed."""


class ShapeError(RsvpError, ValueError):
    pass


class ConvergenceError(NumericError):
    def __init__(self, message, grad_norm=float("nan")):
        super().__init__(message)
        self.grad_norm = grad_norm


class SearchError(RsvpError, RuntimeError):
    """Every candidate of a random search failed."""

    def __init__(self, message, failures=()):
        super().__init__(message)
        self.failures = list(failures)


class FormatError(RsvpError, ValueError):
    """Malformed file; ``offset`` is the byte position (or line number) at fault."""

    def __init__(self, message, offset=None, line=None):
        where = []
        if offset is not None:
            where.append(f"byte offset {offset}")
        if line is not None:
            where.append(f"line {line}")
        if where:
            message = f"{message} ({', '.join(where)})"
        super().__init__(message)
        self.offset = offset
        self.line = line


class ConfigError(RsvpError, ValueError):
    pass
