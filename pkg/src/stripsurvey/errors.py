"""Exception hierarchy shared across the package."""


class StripSurveyError(Exception):
    """Base class for all package errors."""


class SpecValidationError(StripSurveyError):
    """A population spec (copula, marginals, grid) is invalid."""


class FrameValidationError(StripSurveyError):
    """A population frame violates its invariants or a frame file is malformed."""


class DesignError(StripSurveyError):
    """A sampling design cannot be realized on the given frame."""


class ModelFitError(StripSurveyError):
    """Working models cannot be fit from the supplied field plots."""


class EstimationError(StripSurveyError):
    """An estimator's preconditions are not met (e.g. undefined density)."""


class SimulationError(StripSurveyError):
    """A Monte Carlo study is misconfigured or internally inconsistent."""


class ConfigError(StripSurveyError):
    """A configuration document fails schema validation."""
