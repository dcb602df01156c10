"""Exception types shared across the package."""


class ActionOTError(Exception):
    """Base class for solver-level failures."""


class NumericalRangeError(ActionOTError):
    """A density weight left the representable floating-point range."""


class OptimizationFailure(ActionOTError):
    """Gradient descent diverged; carries a snapshot of the failing iterate."""

    def __init__(self, message, snapshot=None):
        super().__init__(message)
        self.snapshot = snapshot or {}


class IntegrationFailure(ActionOTError):
    """Adaptive ODE integration could not continue (step size underflow)."""


class NoConvergenceError(ActionOTError):
    """Shooting search exhausted its budget; carries the best mismatch seen."""

    def __init__(self, message, best_mismatch=None):
        super().__init__(message)
        self.best_mismatch = best_mismatch


class DegenerateCloudError(ValueError):
    """Feature matrix has rank zero (all stacked rows identical)."""


class HeuristicUnavailableError(ActionOTError):
    """The penalty-weight heuristic hit a zero denominator."""


class InvalidMetricError(ValueError):
    """A metric field evaluated to a non-symmetric or non-SPD matrix."""
