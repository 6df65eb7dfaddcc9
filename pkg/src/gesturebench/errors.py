"""Exception hierarchy for the gesturebench pipeline.

Everything raised on purpose derives from GestureBenchError so callers
(CLI, batch runners) can separate pipeline failures from genuine bugs.
"""


class GestureBenchError(Exception):
    """Base class for all pipeline errors."""


class PgmError(GestureBenchError):
    """Malformed, unsupported or zero-area PGM image."""


class WristCsvError(GestureBenchError):
    """Bad wrist annotation file: parse failure, duplicate id, degenerate points."""


class NormalizationError(GestureBenchError):
    """Mask cannot be normalized (e.g. empty after the wrist cut)."""


class GeometryError(GestureBenchError):
    """Contour extraction / resampling / distance-transform precondition failed."""


class DescriptorError(GestureBenchError):
    """A feature computation failed; carries the feature name."""

    def __init__(self, feature, message):
        super().__init__(f"{feature}: {message}")
        self.feature = feature


class MissingFeatureError(GestureBenchError):
    """A matching method was asked for a feature the bundle does not carry."""

    def __init__(self, feature, method=None):
        where = f" (method {method})" if method else ""
        super().__init__(f"bundle is missing feature '{feature}'{where}")
        self.feature = feature


class MatchingError(GestureBenchError):
    """Invalid input to a pairwise cost function."""


class DatasetError(GestureBenchError):
    """Manifest / gallery construction problem (e.g. insufficient images)."""
