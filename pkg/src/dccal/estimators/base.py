"""Base class for calibration estimators."""

from abc import ABC, abstractmethod
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from typing import Any, Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..core.config import SolveOptions
from ..core.errors import (
    DimensionMismatchError,
    InsufficientDataError,
    NonConvergenceError,
    ShapeMismatchError,
)
from ..core.solver import LeastSquaresProblem, SolveReport, levenberg_marquardt
from ..model.kinematics import (
    JointState,
    KinematicModel,
    kinematic_parameter_count,
    pack_parameters,
    unpack_parameters,
)
from ..model.measurement import PNP_MIN_POINTS, Dataset
from .residuals import ReprojectionStats, SetEvaluation, evaluate_set

logger = structlog.get_logger(__name__)

MODE_ENCODERLESS = "encoderless"
MODE_WITH_ENCODERS = "with-encoders"
MODE_VALIDATION = "validation"


def optimization_vector_length(mode: str, num_links: int, num_sets: int) -> int:
    """12 + (3+K)L encoderless, 12 + 3L with encoders, K*L for validation."""
    if mode == MODE_ENCODERLESS:
        return kinematic_parameter_count(num_links) + num_sets * num_links
    if mode == MODE_WITH_ENCODERS:
        return kinematic_parameter_count(num_links)
    if mode == MODE_VALIDATION:
        return num_sets * num_links
    raise ValueError(f"Unknown calibration mode: {mode}")


@dataclass(frozen=True)
class CalibrationEstimate:
    """Kinematic parameters pi and the joint trajectory zeta of K snapshots."""

    model: KinematicModel
    joint_trajectory: Tuple[JointState, ...]
    mode: str = MODE_ENCODERLESS

    def __post_init__(self) -> None:
        object.__setattr__(self, "joint_trajectory", tuple(self.joint_trajectory))

    @property
    def num_sets(self) -> int:
        return len(self.joint_trajectory)

    @property
    def optimization_size(self) -> int:
        return optimization_vector_length(
            self.mode, self.model.num_links, self.num_sets
        )

    def angle_matrix(self) -> np.ndarray:
        """(K, L) array of joint angles."""
        return np.array([state.angles for state in self.joint_trajectory], dtype=float)


@dataclass(frozen=True, eq=False)
class CalibrationResult:
    """Estimate, solver diagnostics and statistics of the optimized residual."""

    estimate: CalibrationEstimate
    report: SolveReport
    stats: ReprojectionStats
    residuals: Optional[np.ndarray] = None

    @property
    def converged(self) -> bool:
        return self.report.converged


class BaseCalibrator(ABC):
    """Base class for estimators minimizing the camera-to-camera reprojection cost.

    Subclasses choose which of the kinematic vector and the joint trajectory
    are free; the residual evaluation, Jacobian assembly and reporting are
    shared.
    """

    mode: str = ""
    requires_excitation: bool = True

    def __init__(
        self,
        dataset: Dataset,
        options: Optional[SolveOptions] = None,
        workers: int = 1,
        min_sets: int = 10,
        force: bool = False,
        strict: bool = False,
    ):
        self.dataset = dataset
        self.options = options or SolveOptions()
        self.workers = max(1, workers)
        self.min_sets = min_sets
        self.force = force
        self.strict = strict
        self.num_links = 0
        self.logger = logger.bind(estimator=self.__class__.__name__)

    @abstractmethod
    def initial_vector(
        self, init_model: KinematicModel, init_angles: Optional[np.ndarray]
    ) -> np.ndarray:
        """Packed starting point of the optimization."""
        pass

    @abstractmethod
    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        """Packed vector -> (kinematic vector, (K, L) joint angles)."""
        pass

    @abstractmethod
    def assemble_jacobian(self, evaluations: List[SetEvaluation]) -> np.ndarray:
        """Columns of the stacked Jacobian for the free parameters."""
        pass

    @property
    def parameter_count(self) -> int:
        return optimization_vector_length(
            self.mode, self.num_links, self.dataset.num_sets
        )

    def check_dataset(self) -> None:
        """Raise when the dataset cannot support this estimator."""
        for index, mset in enumerate(self.dataset.sets):
            if mset.num_points < PNP_MIN_POINTS:
                raise InsufficientDataError(
                    f"Set {index} has {mset.num_points} common points, "
                    f"need {PNP_MIN_POINTS}"
                )
        if self.requires_excitation and self.dataset.num_sets < self.min_sets:
            message = (
                f"{self.dataset.num_sets} measurement sets is below the "
                f"excitation threshold of {self.min_sets}"
            )
            if not self.force:
                raise InsufficientDataError(message)
            self.logger.warning("Running below excitation threshold", reason=message)

    def angle_array(self, angles: Optional[Sequence[Any]]) -> np.ndarray:
        """(K, L) array from a list of JointState or angle rows."""
        if angles is None:
            raise ShapeMismatchError("Initial joint angles are required")
        rows = [a.angles if isinstance(a, JointState) else tuple(a) for a in angles]
        if len(rows) != self.dataset.num_sets:
            raise ShapeMismatchError(
                f"Expected {self.dataset.num_sets} joint states, got {len(rows)}"
            )
        for index, row in enumerate(rows):
            if len(row) != self.num_links:
                raise DimensionMismatchError(
                    f"Joint state {index} has {len(row)} angles, "
                    f"expected {self.num_links}"
                )
        shape = (self.dataset.num_sets, self.num_links)
        return np.array(rows, dtype=float).reshape(shape)

    def evaluate(
        self, kin: np.ndarray, angles: np.ndarray, with_jacobian: bool
    ) -> List[SetEvaluation]:
        """Per-set residuals, across a thread pool when workers > 1."""
        ds = self.dataset

        def one(index: int) -> SetEvaluation:
            return evaluate_set(
                kin,
                self.num_links,
                angles[index],
                ds.intrinsics_s,
                ds.intrinsics_d,
                ds.sets[index],
                with_jacobian,
            )

        if self.workers > 1 and ds.num_sets > 1:
            with ThreadPoolExecutor(max_workers=self.workers) as pool:
                return list(pool.map(one, range(ds.num_sets)))
        return [one(index) for index in range(ds.num_sets)]

    def residual(self, x: np.ndarray) -> np.ndarray:
        kin, angles = self.split(x)
        return np.concatenate(
            [e.residuals for e in self.evaluate(kin, angles, with_jacobian=False)]
        )

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        kin, angles = self.split(x)
        return self.assemble_jacobian(self.evaluate(kin, angles, with_jacobian=True))

    def kinematic_columns(self, evaluations: List[SetEvaluation]) -> np.ndarray:
        return np.vstack([e.jac_kinematic for e in evaluations])

    def joint_columns(self, evaluations: List[SetEvaluation]) -> np.ndarray:
        """Block-diagonal joint Jacobian: set i only depends on beta_i."""
        rows = sum(e.residuals.shape[0] for e in evaluations)
        out = np.zeros((rows, len(evaluations) * self.num_links))
        start = 0
        for index, evaluation in enumerate(evaluations):
            stop = start + evaluation.residuals.shape[0]
            col = index * self.num_links
            out[start:stop, col : col + self.num_links] = evaluation.jac_joints
            start = stop
        return out

    def calibrate(
        self,
        init_model: KinematicModel,
        init_angles: Optional[Sequence[Any]] = None,
    ) -> CalibrationResult:
        """Run the optimization from the given initialization.

        Raises:
            InsufficientDataError: too few sets or common points.
            NonConvergenceError: strict mode and the solver hit max_iterations.
        """
        self.check_dataset()
        self.num_links = init_model.num_links
        x0 = self.initial_vector(init_model, init_angles)
        if x0.shape[0] != self.parameter_count:
            raise ShapeMismatchError(
                f"Initial vector has {x0.shape[0]} entries, "
                f"expected {self.parameter_count}"
            )

        self.logger.info(
            "Starting calibration",
            mode=self.mode,
            sets=self.dataset.num_sets,
            links=self.num_links,
            parameters=self.parameter_count,
        )
        problem = LeastSquaresProblem(self.residual, x0, self.jacobian, name=self.mode)
        report = levenberg_marquardt(problem, self.options)

        kin, angles = self.split(report.parameters)
        residuals = self.residual(report.parameters)
        estimate = CalibrationEstimate(
            model=unpack_parameters(kin, self.num_links).canonical(),
            joint_trajectory=tuple(JointState(row).canonical() for row in angles),
            mode=self.mode,
        )
        stats = ReprojectionStats.from_residuals(
            residuals, [s.num_points for s in self.dataset.sets]
        )
        result = CalibrationResult(estimate, report, stats, residuals)

        if not report.converged:
            self.logger.warning(
                "Calibration did not converge",
                iterations=report.iterations,
                final_cost=report.final_cost,
            )
            if self.strict:
                raise NonConvergenceError(
                    f"{self.mode} calibration stopped after {report.iterations} "
                    f"iterations ({report.termination.value})"
                )
        self.logger.info(
            "Finished calibration",
            mode=self.mode,
            mean_px=stats.mean_px,
            final_cost=report.final_cost,
        )
        return result

    def get_info(self) -> Dict[str, Any]:
        """Get estimator information."""
        return {
            "name": self.__class__.__name__,
            "mode": self.mode,
            "sets": self.dataset.num_sets,
            "workers": self.workers,
            "requires_excitation": self.requires_excitation,
        }


def packed_initial(model: KinematicModel, angles: np.ndarray) -> np.ndarray:
    return np.concatenate([pack_parameters(model), angles.reshape(-1)])
