"""Exception types raised across the package."""


class PolySampleError(Exception):
    """Base class for all package errors."""


class DegenerateDenominator(PolySampleError, ValueError):
    """The shift map was evaluated where |w|·|z| is (numerically) 1 or more."""


class InvalidEdgeLengths(PolySampleError, ValueError):
    pass


class Unstable(PolySampleError, ValueError):
    """Some cluster of coincident directions carries half the total length or more."""


class NonConvergence(PolySampleError):
    """Newton iteration for the conformal barycenter ran out of iterations."""

    def __init__(self, message, best_w=None, residual=None):
        super().__init__(message)
        self.best_w = best_w
        self.residual = residual


class SingularGram(PolySampleError, ValueError):
    """A projector sum sum_i c_i (I - y_i y_i^T) is not positive definite."""


class DegenerateSpan(PolySampleError, ValueError):
    """The edge directions lie in a linear hyperplane, so the SO(d) action is not free."""


class AbortAfterRedraws(PolySampleError):
    """Too many consecutive closure failures while drawing a single sample."""


class ZeroWeightSum(PolySampleError, ValueError):
    pass


class BudgetExceeded(PolySampleError):
    """The sample budget ran out before the confidence interval was small enough."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report
