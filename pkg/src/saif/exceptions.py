"""Exception hierarchy shared by every solver module."""


class SaifError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(SaifError, ValueError):
    """Array shapes do not agree."""


class ParameterError(SaifError, ValueError):
    """An argument is outside its admissible range."""


class DomainError(SaifError, ValueError):
    """A point lies outside the effective domain of a convex conjugate.

    For the logistic loss this signals an infeasible dual point.
    """


class PreconditionError(SaifError, ValueError):
    """A documented precondition of an operation was violated."""


class ConsistencyError(SaifError, ArithmeticError):
    """Floating-point results contradict a mathematical identity.

    Raised for instance when a duality gap is negative by more than the
    rounding slack, which indicates an infeasible dual point or a bug.
    """


class ValidationError(SaifError, ValueError):
    """Structured input (tree, file) failed validation."""


class ParseError(SaifError, ValueError):
    """A text input could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class SchemaError(SaifError, ValueError):
    """A tabular input lacks a required column."""


class ConvergenceError(SaifError, RuntimeError):
    """The outer-iteration budget was exhausted.

    Attributes
    ----------
    result : SolveResult
        Best iterate reached before giving up, with ``certificate=False``.
    """

    def __init__(self, message, result=None):
        super().__init__(message)
        self.result = result
