"""
Exception hierarchy for the labeling pipeline.
"""


class LogLabError(Exception):
    """Base class for all pipeline errors."""


class ConfigError(LogLabError):
    """Run configuration could not be loaded or validated."""

    def __init__(self, key: str, message: str):
        self.key = key
        super().__init__(f"{key}: {message}")


class MalformedLine(LogLabError):
    """A log line could not be parsed into a record."""


class EmptyDataset(LogLabError):
    """No valid records were loaded."""


class InvalidSpec(LogLabError):
    """Synthetic corpus specification is invalid."""


class DegeneratePartition(LogLabError):
    """One of the weak classes P or U is empty."""


class InvalidLength(LogLabError):
    """Requested sequence length is below the minimum of 2."""


class InvalidConfig(LogLabError):
    """Model, loss or training configuration violates its invariants."""


class ShapeMismatch(LogLabError):
    """Model input does not match the configured shape."""


class EmptyBatch(LogLabError):
    """Loss was requested for an empty batch."""


class NonFiniteInput(LogLabError):
    """Loss input contains NaN or Inf."""


class InvalidQ(LogLabError):
    """Ratio q outside the open interval (0, 1)."""


class NonFiniteLoss(LogLabError):
    """Training produced a NaN or Inf loss."""


class LengthMismatch(LogLabError):
    """Aligned sequences have different lengths."""


class VersionMismatch(LogLabError):
    """Checkpoint format or shape does not match what the caller expects."""


class CheckpointReadError(LogLabError, OSError):
    """Checkpoint file exists but cannot be decoded."""
