"""
Exception types raised by vmspod.
"""

from typing import Sequence


class VmsPodError(Exception):
    """Base class for all vmspod errors."""


class InvalidArgumentError(VmsPodError, ValueError):
    """An argument is outside the range an operation accepts."""


class InvalidConfigurationError(VmsPodError, ValueError):
    """A combination of parameters cannot produce a meaningful result."""


class ConfigError(VmsPodError, ValueError):
    """A configuration field failed validation."""

    def __init__(self, field: str, message: str):
        self.field = field
        super().__init__(f"{field}: {message}")


class FactorizationError(VmsPodError):
    """A linear system could not be factored or solved accurately."""


class StabilityError(VmsPodError):
    """A trajectory left the discrete stability bound of its scheme."""

    def __init__(self, label: str, step: int, norm: float, bound: float):
        self.label = label
        self.step = step
        super().__init__(f"[{label}] stability bound violated at step {step}: {norm:.6e} > {bound:.6e}")


class EmptyBasisError(VmsPodError):
    """Every POD eigenvalue fell below the rank threshold."""


class RankDeficiencyError(VmsPodError):
    """The gradients of the coarse POD modes are linearly dependent."""

    def __init__(self, message: str, dependent_modes: Sequence[int] = ()):
        self.dependent_modes = list(dependent_modes)
        if self.dependent_modes:
            message = f"{message} (dependent modes: {self.dependent_modes})"
        super().__init__(message)


class ArchiveError(VmsPodError):
    """An artifact on disk cannot be used."""


class CorruptArchiveError(ArchiveError):
    """Bad magic string, unsupported version, truncated payload or checksum mismatch."""


class MismatchedMeshError(ArchiveError):
    """An artifact was produced on a different mesh or element degree."""
