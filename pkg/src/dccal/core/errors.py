"""Exception hierarchy for dccal.

Every error carries the process exit code the CLI reports for it.
"""

from typing import Optional, Sequence


class DccError(Exception):
    """Base exception for dccal operations."""

    exit_code = 1


class ConfigError(DccError):
    """Invalid or unreadable configuration or input file."""


class ArtifactMissingError(DccError):
    """Expected input artifacts are absent."""

    def __init__(self, missing: Sequence[str]):
        self.missing = list(missing)
        super().__init__("Missing artifacts: " + ", ".join(self.missing))


class SingularityError(DccError):
    """Euler decomposition requested at the pitch singularity."""


class BehindCameraError(DccError):
    """A point lies behind (or on) the image plane of a camera."""


class DimensionMismatchError(DccError):
    """Joint state length does not match the number of links."""


class LengthMismatchError(DccError):
    """Packed parameter vector has the wrong length."""


class ShapeMismatchError(DccError):
    """Estimates and reference values have incompatible shapes."""


class DegenerateConfigurationError(DccError):
    """Too few or collinear correspondences for pose estimation."""


class InsufficientOverlapError(DccError):
    """Too few target points observed by both cameras."""


class UnknownPointIdError(DccError):
    """An observation names a point the fiducial target does not have."""


class InsufficientDataError(DccError):
    """Too few measurement sets for a well-excited calibration."""


class MissingEncoderAnglesError(DccError):
    """A measurement set lacks the known joint angles required by the mode."""


class InsufficientObservationsError(DccError):
    """A tracker frame does not carry enough observations to be solved."""


class AllSetsRejectedError(DccError):
    """Every simulated configuration was rejected for visibility."""

    exit_code = 2


class NonFiniteResidualError(DccError):
    """The residual function produced non-finite values."""

    exit_code = 3

    def __init__(self, message: str, iterate: Optional[Sequence[float]] = None):
        super().__init__(message)
        self.iterate = None if iterate is None else list(iterate)


class NonConvergenceError(DccError):
    """An optimization did not reach an acceptable solution."""

    exit_code = 3


class PnPConvergenceError(NonConvergenceError):
    """PnP refinement ended with a reprojection error above threshold."""
