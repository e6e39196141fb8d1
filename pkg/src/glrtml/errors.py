"""Exception types raised across the package."""


class GlrtmlError(Exception):
    """Base class for all package errors."""


class NumericalError(GlrtmlError, ArithmeticError):
    """Base class for numerical failures (CLI exit code 4)."""


class NotPositiveDefinite(NumericalError):
    """A Cholesky pivot fell below the pivot floor.

    Callers own the regularization policy: add a ridge and retry.
    """


class NonConvergence(NumericalError):
    """An iterative routine hit its iteration cap."""


class EmptyComponent(NumericalError):
    """A mixture component lost all responsibility mass and could not be re-seeded."""


class DimensionMismatch(GlrtmlError, ValueError):
    pass


class EmptyInput(GlrtmlError, ValueError):
    pass


class InvalidConfig(GlrtmlError, ValueError):
    pass


class InvalidLabel(GlrtmlError, ValueError):
    pass


class TooFewPoints(GlrtmlError, ValueError):
    pass


class NoPositivePairs(GlrtmlError, ValueError):
    pass


class NoNegativePairs(GlrtmlError, ValueError):
    pass


class ParseFailure(GlrtmlError, ValueError):
    def __init__(self, message, line=None):
        super().__init__(message if line is None else f"line {line}: {message}")
        self.line = line


class IoFailure(GlrtmlError, OSError):
    pass
