class SemigroupLabError(Exception):
    pass


class StructuralError(SemigroupLabError, ValueError):
    """Shapes or structural invariants do not match."""


class NumericError(SemigroupLabError, ArithmeticError):
    """Non-finite input or output."""


class DomainError(SemigroupLabError, ValueError):
    """A parameter lies outside the range where a formula or operation is defined."""


class SingularityError(SemigroupLabError, ArithmeticError):
    """A resolvent was requested at (or numerically at) a spectral point."""


class ConvergenceError(SemigroupLabError, RuntimeError):
    """An adaptive scheme hit its refinement cap before reaching tolerance."""

    def __init__(self, message, achieved=None):
        super().__init__(message)
        self.achieved = achieved
