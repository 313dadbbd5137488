"""Exception hierarchy shared across the toolkit."""


class PpgSpoofError(Exception):
    """Base class for all toolkit errors."""


class ParameterError(PpgSpoofError):
    """An argument violates a precondition (bad band, bad window, ...)."""


class DataValidityError(PpgSpoofError):
    """Input data is malformed: non-finite samples, gaps, bad CSV."""


class DegenerateInputError(PpgSpoofError):
    """Input is technically valid but carries no usable variation."""


class FeatureExtractionError(PpgSpoofError):
    """A cycle has no usable fiducial structure (e.g. monotone)."""


class UsageError(PpgSpoofError):
    """API misuse: wrong call order, uncalibrated model, etc."""


class CalibrationError(PpgSpoofError):
    """Could not reach the requested operating point."""

    def __init__(self, message, achieved_eer=None):
        super().__init__(message)
        self.achieved_eer = achieved_eer


class TrainingError(PpgSpoofError):
    """Training diverged or produced non-finite losses."""


class DependencyError(PpgSpoofError):
    """A required upstream artifact is missing."""
