"""Exception types shared across the package."""


class ExpertBoError(Exception):
    """Base class for all package errors."""


class DomainError(ExpertBoError):
    """A point lies outside the search-space bounds."""


class EmptyRequest(ExpertBoError):
    """A sampling request asked for zero points."""


class InvalidFamily(ExpertBoError):
    """Task-family generator parameters are unusable."""


class RegretUnavailable(ExpertBoError):
    """Regret was requested for a task without a known optimum."""


class InsufficientData(ExpertBoError):
    """A training sequence is too short to split into context and targets."""


class TrainingDiverged(ExpertBoError):
    """Training produced a non-finite loss or non-finite weights."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = diagnostics or {}


class ShapeError(ExpertBoError):
    """Input dimensionality does not match the model or space."""


class CheckpointError(ExpertBoError):
    """A model checkpoint is missing, corrupt, or version-incompatible."""


class HypothesisUnavailable(ExpertBoError):
    """An expert hypothesis was requested for a task without a known optimum."""


class ElicitationAborted(ExpertBoError):
    """Interactive preference elicitation stopped before completion.

    Carries the partially labeled dataset so callers can persist it.
    """

    def __init__(self, message, partial=None):
        super().__init__(message)
        self.partial = partial


class FitError(ExpertBoError):
    """Preference-model fitting failed (singular kernel after jitter escalation)."""


class ModelNotFitted(ExpertBoError):
    """A preference posterior was requested from an unfitted model."""


class InvalidPosterior(ExpertBoError):
    """A posterior combination received a non-positive variance."""


class BackgroundRequired(ExpertBoError):
    """SHAP attribution needs a nonempty background set."""


class LimeFitError(ExpertBoError):
    """The local linear surrogate could not be fit."""


class PhaseError(ExpertBoError):
    """A session request is illegal in the current phase."""


class SessionNotFound(ExpertBoError):
    """No session exists with the given id."""


class RecordError(ExpertBoError):
    """A run record is corrupt, tampered with, or version-incompatible."""


class ConfigError(ExpertBoError):
    """A benchmark configuration file is missing or invalid."""


class NothingToReport(ExpertBoError):
    """Report generation found no result tables."""
