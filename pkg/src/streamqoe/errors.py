"""Exception types shared across the package."""


class StreamQoeError(Exception):
    """Base class for all package errors."""


class DomainError(StreamQoeError, ValueError):
    """An input lies outside the domain of a formula (e.g. rate <= 1)."""


class InfeasibleTarget(StreamQoeError, ValueError):
    """No policy of the requested family can meet the (D, eps) target."""


class NumericError(StreamQoeError, ArithmeticError):
    """A formula produced a value it should not (non-positive log argument, p leaving (0, 1])."""
