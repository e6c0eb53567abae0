"""Exception taxonomy shared across the suite.

ConfigurationError covers everything a user can cause from the outside
(bad config values, shape mismatches at API boundaries, malformed weight
files). Internal invariant violations raise plain AssertionError instead,
since they indicate bugs in graph construction, not user input.
"""


class ConfigurationError(ValueError):
    """User-facing error: invalid configuration, shapes, or file contents."""


class WeightFormatError(ConfigurationError):
    """Weight file is malformed or does not match the target graph."""


class DivergenceError(RuntimeError):
    """Optimization produced a non-finite loss."""

    def __init__(self, epoch: int, message: str = ""):
        self.epoch = epoch
        super().__init__(message or f"non-finite loss at epoch {epoch}")
