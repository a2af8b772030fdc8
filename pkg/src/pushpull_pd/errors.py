"""Exception types raised by the library."""


class PushPullError(Exception):
    """Base class for all library errors."""


class SlaterViolation(PushPullError):
    """The supplied Slater point is not strictly feasible."""


class GenerationFailure(PushPullError):
    """Instance generation could not produce a valid instance."""


class MissingSelfLoop(PushPullError):
    """A graph node has no self-loop (zero in- or out-degree)."""


class DimensionMismatch(PushPullError):
    pass


class InfeasibleStart(PushPullError):
    """An initial primal point lies outside the box."""


class NonFiniteState(PushPullError):
    """An iterate became NaN or infinite.

    Attributes
    ----------
    round : int
        Round index at which the non-finite value was produced.
    """

    def __init__(self, message, round=None):
        super().__init__(message)
        self.round = round


class RangeError(PushPullError):
    pass


class NonStochastic(PushPullError):
    pass


class DegenerateBalance(PushPullError):
    pass


class NotConverged(PushPullError):
    """A finite matrix product did not reach consensus within tolerance."""

    def __init__(self, message, spread):
        super().__init__(message)
        self.spread = spread


class NoConvergence(PushPullError):
    """An iterative solver exhausted its budget.

    Attributes
    ----------
    best_residual : float
        Smallest residual seen before giving up.
    """

    def __init__(self, message, best_residual):
        super().__init__(message)
        self.best_residual = best_residual
