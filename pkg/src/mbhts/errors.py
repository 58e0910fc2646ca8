"""Exception types raised by the allocation library."""


class MbhtsError(Exception):
    """Base class for all library errors."""


class InvalidConfigurationError(MbhtsError, ValueError):
    """System parameters or inputs violate a precondition."""


class NumericRangeError(MbhtsError, ArithmeticError):
    """A computed quantity over- or underflowed."""


class SingularChannelError(MbhtsError, ArithmeticError):
    """The channel Gram matrix is too ill-conditioned for zero-forcing."""

    def __init__(self, condition_number):
        self.condition_number = condition_number
        super().__init__(
            f"channel Gram matrix is singular (condition number {condition_number:.3e})")


class DegenerateChannelError(MbhtsError, ArithmeticError):
    """A user has zero effective gain, so no SINR target can be met."""


class ConvergenceError(MbhtsError, ArithmeticError):
    """An iterative routine ran out of iterations.

    ``last_iterate`` holds whatever the routine had when it stopped.
    """

    def __init__(self, message, last_iterate=None):
        self.last_iterate = last_iterate
        super().__init__(message)


class ReallocationInfeasibleError(MbhtsError):
    """The pinned users cannot all be held at their demands within the budget."""

    def __init__(self, message, last_iterate=None):
        self.last_iterate = last_iterate
        super().__init__(message)


class DivergenceError(MbhtsError, ArithmeticError):
    """Training produced a non-finite loss."""

    def __init__(self, epoch):
        self.epoch = epoch
        super().__init__(f"non-finite training loss at epoch {epoch}")


class CorruptModelError(MbhtsError, ValueError):
    """A saved model file could not be parsed or has inconsistent shapes."""
