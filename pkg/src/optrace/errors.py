"""Exception hierarchy shared by all optrace modules."""


class OptraceError(Exception):
    """Base class for every error raised by optrace."""


class DomainError(OptraceError, ValueError):
    """An argument lies outside the domain of the requested quantity."""


class DegenerateDistributionError(DomainError):
    """The requested density is a point mass and has no finite values."""


class ContractError(OptraceError, ValueError):
    """A precondition of an operation was violated by the caller."""


class NumericalError(OptraceError, ArithmeticError):
    """A quadrature or root search failed to reach its tolerance.

    Parameters
    ----------
    message : str
        Human readable description.
    **diagnostics
        Arbitrary key/value context (abscissa, tolerance, error estimate...).
    """

    def __init__(self, message, **diagnostics):
        self.diagnostics = diagnostics
        if diagnostics:
            detail = ", ".join(f"{k}={v!r}" for k, v in diagnostics.items())
            message = f"{message} ({detail})"
        super().__init__(message)
