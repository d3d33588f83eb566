"""Exception types shared across the package."""


class NestedEnkfError(Exception):
    """Base class for errors raised by this package."""


class BlowupError(NestedEnkfError):
    """A model integration produced non-finite values."""


class SingularTransformError(NestedEnkfError):
    """An ensemble-transform weight matrix was numerically non-invertible."""


class RankDeficiencyError(NestedEnkfError):
    """A least-squares fit had no usable signal (e.g. constant regressor)."""


class AlignmentError(NestedEnkfError):
    """Observation times do not align with the trajectory stride."""


class ConfigError(NestedEnkfError):
    """An experiment configuration is invalid."""
