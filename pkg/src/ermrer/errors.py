"""Exception hierarchy shared by every module of the package."""


class ErmrerError(Exception):
    """Base class for all errors raised by :mod:`ermrer`."""


class InvalidArgumentError(ErmrerError, ValueError):
    """An argument is malformed (wrong size, empty support, bad parameter)."""


class DomainError(ErmrerError, ValueError):
    """A mathematical precondition fails (absolute continuity, infeasible factor)."""


class InfeasibleError(ErmrerError):
    """The requested target cannot be met by any admissible parameter.

    ``supremum`` carries the best achievable value when one is known.
    """

    def __init__(self, message, supremum=None):
        super().__init__(message)
        self.supremum = supremum


class IndeterminateError(ErmrerError):
    """A numerical test could not decide; ``bracket`` holds the best bounds found."""

    def __init__(self, message, bracket=None):
        super().__init__(message)
        self.bracket = bracket


class ConvergenceError(ErmrerError):
    """An iterative search exhausted its step budget."""
