"""
Exception hierarchy for ssbench.

Every failure the toolkit raises on purpose derives from BenchmarkError so the
CLI can tell runtime failures apart from usage mistakes.
"""


class BenchmarkError(Exception):
    """Base class for all ssbench errors."""


class InvalidCloudError(BenchmarkError):
    """Point cloud violates shape or finiteness requirements."""


class TransformError(BenchmarkError):
    """Invalid scale/shear parameters or transform policy."""


class DatasetError(BenchmarkError):
    """Dataset specification or directory is unusable."""


class PointFileError(DatasetError):
    """Malformed xyzl/pcb file."""


class ModelError(BenchmarkError):
    """Model construction, input or checkpoint problem."""


class SpectralError(BenchmarkError):
    """Graph or spectral basis misuse."""


class AttackConfigError(BenchmarkError):
    """Attack hyperparameters violate their invariants."""


class AttackDivergedError(BenchmarkError):
    """Attack loss became non-finite."""

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class DefenseError(BenchmarkError):
    """Defense cannot be applied to the given cloud."""


class EvaluationError(BenchmarkError):
    """Metric is undefined for the given samples."""


class ConfigError(BenchmarkError):
    """Run configuration is invalid."""


class FormatError(BenchmarkError):
    """Artifact carries an unknown or unsupported format tag."""
