"""Exception hierarchy shared by every module of the package."""


class CVQKDError(Exception):
    """Base class for all package errors."""


class DomainError(CVQKDError, ValueError):
    """An input lies outside the domain of an operation (e.g. V < 1, T = 0)."""


class NumericError(CVQKDError, ArithmeticError):
    """A numerical routine failed or produced an inconsistent result."""


class EstimationError(NumericError):
    """Too few or degenerate samples for a statistical estimate."""


class NonConvergenceError(NumericError):
    """An iterative procedure hit its cap without converging.

    The last two evaluated values are kept on ``values`` for diagnostics.
    """

    def __init__(self, message, values=()):
        super().__init__(message)
        self.values = tuple(values)


class UnsupportedConfigError(DomainError):
    """The protocol configuration is valid but not handled by this routine."""
