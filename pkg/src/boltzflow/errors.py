"""Exception hierarchy shared across the package.

Each class maps to one CLI exit code, see ``boltzflow.cli``.
"""


class BoltzflowError(Exception):
    """Base class for all package errors."""


class DimensionError(BoltzflowError, ValueError):
    """Input has the wrong shape or dimension."""


class UnsupportedKindError(BoltzflowError, ValueError):
    """Operation is not defined for this energy kind."""


class SamplerInitError(BoltzflowError):
    """MCMC chain cannot start (non-finite energy at the initial point)."""


class DegenerateWeightsError(BoltzflowError):
    """All importance weights vanished (every candidate had -inf log density)."""


class EstimateError(BoltzflowError):
    """Vector-field estimate came out non-finite."""


class SingularScheduleError(BoltzflowError):
    """Conditional field is singular at this (schedule, t) combination."""


class ClampedTimeError(BoltzflowError):
    """t below the schedule's clamp threshold where the candidate law explodes."""


class NumericError(BoltzflowError):
    """Non-finite value in a numeric computation (layer/loss/state)."""


class OdeDivergenceError(NumericError):
    """ODE state became non-finite during integration."""

    def __init__(self, step: int, message: str = ""):
        self.step = step
        super().__init__(message or f"non-finite ODE state at step {step}")


class EmptyBufferError(BoltzflowError):
    """Sampling from a replay buffer that holds no rows."""


class TrainingAbortedError(NumericError):
    """Training stopped after too many consecutive failed steps."""


class EvaluationError(BoltzflowError):
    """Too many likelihood failures while evaluating a dataset."""


class CheckpointError(BoltzflowError):
    """Checkpoint file is missing, corrupt, or from an unknown version."""


class ConfigError(BoltzflowError, ValueError):
    """Config file could not be parsed or violates a constraint."""
