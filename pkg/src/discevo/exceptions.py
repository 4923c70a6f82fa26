"""Exception types shared across the package."""


class InvalidArgument(ValueError):
    """An argument is malformed (empty window, mismatched shapes, ...)."""


class UnsupportedArgument(ValueError):
    """An argument is well-formed but outside the supported model class."""


class ConstraintViolation(ValueError):
    """A structural invariant fails, e.g. a singular external block.

    ``index`` carries the offending ``(j, k)`` pair or row when known.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class PreconditionViolation(ValueError):
    """Input does not satisfy an operation's precondition.

    ``residual`` carries the measured quantity that failed the check.
    """

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class ResourceError(RuntimeError):
    """Requested problem size exceeds the dense desk-scale cap."""


class NumericError(ArithmeticError):
    """Non-finite values appeared during a computation."""
