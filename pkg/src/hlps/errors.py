"""Exception hierarchy shared by every hlps module."""


class HLPSError(Exception):
    """Base class for all errors raised by hlps."""


class ConfigError(HLPSError, ValueError):
    """Invalid configuration value, key or file.

    Attributes:
        line: 1-based line number in the config file when the error can be anchored to one.
    """

    def __init__(self, message: str, line: int | None = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class AutodiffError(HLPSError):
    """Misuse of the differentiation helpers (e.g. backward on a non-scalar root)."""


class NonFiniteGradientError(AutodiffError):
    """A parameter received a NaN or infinite gradient."""

    def __init__(self, name: str):
        self.name = name
        super().__init__(f"non-finite gradient for parameter '{name}'")


class GPError(HLPSError):
    """Batch GP failure: non-finite inputs or Cholesky failure after jitter escalation."""


class StateSpaceError(HLPSError):
    """Invalid input to the state-space recursion."""


class RepresentationError(HLPSError):
    """State dimension does not match the representation model."""


class ObjectiveError(HLPSError):
    """Invalid batch handed to the representation objective."""


class TrainingError(HLPSError):
    """Non-finite loss or corrupted training state."""


class CheckpointError(HLPSError):
    """Missing, truncated or corrupt checkpoint container."""


class TransferError(HLPSError):
    """Source checkpoint is incompatible with the target configuration."""
