"""Exception hierarchy shared by every module.

Each error carries a stable ``kind`` string so front ends (CLI, HTTP
service) can report failures in a structured way without matching on
class names or messages.
"""

from __future__ import annotations


class SketchArmError(Exception):
    """Base class for all domain errors raised by this package."""

    kind = "domain"


class InputError(SketchArmError):
    """Malformed or inconsistent caller input (lengths, bounds, empties)."""

    kind = "input"


class InsufficientDataError(SketchArmError):
    """Fewer samples than an estimator's minimum."""

    kind = "insufficient-data"


class DegenerateProjectionError(SketchArmError):
    """Homogeneous point mapped to (numerically) zero fourth component."""

    kind = "degenerate-projection"


class DegenerateStatisticsError(SketchArmError):
    """Statistic undefined for the given sample (for example zero variance)."""

    kind = "degenerate-statistics"


class DegenerateConfigurationError(SketchArmError):
    """Point configuration leaves the estimation problem rank deficient."""

    kind = "degenerate-configuration"


class TrainingFailureError(SketchArmError):
    """Regressor training diverged. Carries the training trace so far."""

    kind = "training-failure"

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class CalibrationMethodError(SketchArmError):
    """A method inside a multi-method comparison failed; names the method."""

    kind = "calibration-method"

    def __init__(self, method, cause):
        super().__init__(f"calibration method '{method}' failed: {cause}")
        self.method = method
        self.cause = cause
        if isinstance(cause, SketchArmError):
            self.kind = cause.kind


class LimitViolationError(SketchArmError):
    """Joint value outside the chain's limits with clamping disabled."""

    kind = "limit-violation"


class NonConvergenceError(SketchArmError):
    """Iterative solver hit its iteration budget.

    ``joints`` and ``residual`` hold the best configuration seen.
    """

    kind = "non-convergence"

    def __init__(self, message, joints=None, residual=None, trace=None):
        super().__init__(message)
        self.joints = joints
        self.residual = residual
        self.trace = trace


class UnreachableTargetError(SketchArmError):
    """Target outside the arm's workspace (or joint limits)."""

    kind = "unreachable"


class SingularAzimuthError(SketchArmError):
    """Target on the base rotation axis; the azimuth joint is undefined."""

    kind = "singular-azimuth"
