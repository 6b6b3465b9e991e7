"""Exception hierarchy.  Each class carries the CLI exit code it maps to."""


class YoccozError(Exception):
    exit_code = 3


class InvalidArgument(YoccozError, ValueError):
    exit_code = 3


class ConvergenceError(YoccozError):
    """A numerical solver (root finder, Newton, Laplace) did not converge."""

    exit_code = 3

    def __init__(self, message, last_good=None, partial=None):
        super().__init__(message)
        self.last_good = last_good
        self.partial = partial


class UnsupportedConfiguration(YoccozError):
    """The polynomial is outside the supported class (e.g. a non-repelling
    fixed point, a renormalizable critical point where a nest is requested)."""

    exit_code = 4


class HorizonExhausted(YoccozError):
    """A search ran out of iterates.  Negative results are "at horizon"."""

    exit_code = 2

    def __init__(self, message, horizon=None, partial=None):
        super().__init__(message)
        self.horizon = horizon
        self.partial = partial


class BoundaryAmbiguity(YoccozError):
    """A point lies inside the tube around the depth-0 boundary."""

    exit_code = 2

    def __init__(self, message, step=None, point=None):
        super().__init__(message)
        self.step = step
        self.point = point


class OutsidePartition(YoccozError):
    exit_code = 3


class InconsistentAnchor(YoccozError):
    exit_code = 3


class CheckFailed(YoccozError):
    """A structural audit failed; ``clause`` names the violated condition."""

    exit_code = 3

    def __init__(self, message, clause=None):
        super().__init__(message)
        self.clause = clause


class RenormalizationDetected(UnsupportedConfiguration):
    """Central returns persist: the critical point is renormalizable at the
    horizon, so no non-renormalizable box mapping or nest is available."""

    def __init__(self, message, period=None, depth=None):
        super().__init__(message)
        self.period = period
        self.depth = depth
