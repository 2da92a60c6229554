"""Exception types shared across the package.

The CLI maps these onto exit codes: configuration problems exit 2,
numerical failures exit 3.
"""


class DermcbmError(Exception):
    """Base class for all package errors."""


class EmbeddingFormatError(DermcbmError):
    """Raised when an embedding container or its sidecar is malformed."""


class ConfigurationError(DermcbmError):
    """Raised for invalid configs, missing files, or inconsistent inputs."""


class NumericalDegeneracyError(DermcbmError):
    """Raised when a computation hits a degenerate case (zero vectors,
    non-finite values) that makes the result meaningless."""


class StageError(DermcbmError):
    """Wraps an error raised inside a named pipeline stage."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause
