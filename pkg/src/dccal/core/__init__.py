"""Core components: configuration, errors and the least-squares solver."""

from .config import RunConfig, SolveOptions
from .errors import DccError
from .solver import LeastSquaresProblem, SolveReport, levenberg_marquardt

__all__ = [
    "RunConfig",
    "SolveOptions",
    "DccError",
    "LeastSquaresProblem",
    "SolveReport",
    "levenberg_marquardt",
]
