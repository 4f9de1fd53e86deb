"""Exception and warning types raised across the package."""


class TwRelayError(Exception):
    """Base class for all package errors."""


class ConfigError(TwRelayError, ValueError):
    """Invalid system or experiment configuration."""


class DimensionError(TwRelayError, ValueError):
    """Array shapes that do not agree with the signal model."""


class SingularTrainingError(TwRelayError):
    """Training matrix without full row rank (or zero training where forbidden)."""


class DegenerateEstimateError(TwRelayError):
    """Backward-channel estimate too close to zero to invert."""


class ModelViolationError(TwRelayError):
    """A covariance that should be positive semidefinite is not."""


class SolverError(TwRelayError):
    """The power-allocation bisection did not converge.

    Attributes
    ----------
    residual : float
        Last budget residual seen before giving up.
    """

    def __init__(self, message, residual=float("nan")):
        super().__init__(message)
        self.residual = residual


class ExperimentAborted(TwRelayError):
    """Too many failed trials in one Monte Carlo cell."""


class DegenerateTrainingWarning(UserWarning):
    """Training with zero energy; the estimator falls back to the prior mean."""


class TiedSingularValueWarning(UserWarning):
    """Dominant singular value is (numerically) repeated."""
