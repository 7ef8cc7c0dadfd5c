"""Exception types shared across the package."""


class NumericalAbort(FloatingPointError):
    """A value or gradient became non-finite during an iterative run.

    ``index`` is the iterate (or sample) index at which it happened.
    """

    def __init__(self, message, index=None):
        super().__init__(message)
        self.index = index


class CapabilityError(RuntimeError):
    """The object does not expose what the operation needs (e.g. no Hessian)."""


class PrecisionError(ArithmeticError):
    """A numerical oracle did not reach its requested precision."""
