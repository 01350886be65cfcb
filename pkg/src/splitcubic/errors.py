"""Exception types raised across the package."""


class NonFinite(ValueError):
    """Input or intermediate value contains NaN or Inf."""


class SingularShift(ArithmeticError):
    """The shifted matrix ``A + sigma I`` is not positive definite."""


class MaxIterExceeded(RuntimeError):
    pass


class DimensionMismatch(ValueError):
    pass


class InvalidParams(ValueError):
    pass


class FormatError(ValueError):
    """Malformed matrix container file."""


class ParseError(ValueError):
    """Malformed LIBSVM text; carries the 1-based line number."""

    def __init__(self, line, reason):
        super().__init__(f"line {line}: {reason}")
        self.line = line
        self.reason = reason


class WorkerPanicked(RuntimeError):
    """The background curvature worker died with an exception."""
