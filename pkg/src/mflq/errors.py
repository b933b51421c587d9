"""Exception types raised across the package."""


class MFLQError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatch(MFLQError):
    pass


class NonFinite(MFLQError):
    pass


class AsymmetryExceedsTolerance(MFLQError):
    pass


class NotZeroSum(MFLQError):
    pass


class SingularLyapunov(MFLQError):
    pass


class SingularOperator(MFLQError):
    pass


class UnstableOperator(MFLQError):
    pass


class NotSolved(MFLQError):
    pass


class ResolventSingular(MFLQError):
    pass


class RangeConditionFailed(MFLQError):
    pass


class UnstableHomogeneousSystem(MFLQError):
    pass


class NonFiniteState(MFLQError):
    """A simulated path left the representable range.

    Attributes
    ----------
    time : float
        First grid time at which a non-finite state was produced.
    """

    def __init__(self, message, time):
        super().__init__(message)
        self.time = float(time)
