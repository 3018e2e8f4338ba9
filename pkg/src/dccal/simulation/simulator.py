"""Synthetic dynamic camera cluster: configuration sampling, measurement
synthesis, initialization perturbation and the end-to-end simulation study.

Pixel noise is drawn from a per-set generator seeded with (rng_seed, set
index), so datasets do not depend on the number of worker threads.
"""

import itertools
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import List, Literal, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field, model_validator

from ..core.config import SolveOptions, YamlModel
from ..core.errors import AllSetsRejectedError, ConfigError, DccError
from ..estimators.calibration import (
    CalibrationResult,
    TruthErrorReport,
    calibrate_encoderless,
    evaluate_against_truth,
    validate,
)
from ..io.reports import (
    JointRow,
    ParameterRow,
    ReprojectionRow,
    joint_error_rows,
    parameter_error_rows,
    reprojection_row,
)
from ..io.schemas import KinematicModelSchema, TargetSchema, Vec6
from ..model.camera import CameraIntrinsics, project_points, visible_mask
from ..model.geometry import Pose6, RigidTransform, apply, pose_to_transform
from ..model.kinematics import (
    DhLink,
    JointState,
    KinematicModel,
    full_chain,
    pack_parameters,
    translation_role_mask,
    unpack_parameters,
)
from ..model.measurement import (
    Dataset,
    MeasurementSet,
    build_measurement_set,
    target_points,
)

logger = structlog.get_logger(__name__)

SAMPLING_STREAM = 1_000_003
INIT_STREAM = 1_000_033


class JointRange(BaseModel):
    """Evenly spaced joint values, endpoints included."""

    model_config = ConfigDict(extra="forbid")

    min_rad: float
    max_rad: float
    count: int = Field(ge=1)

    @model_validator(mode="after")
    def _ordered(self) -> "JointRange":
        if self.max_rad < self.min_rad:
            raise ValueError("max_rad must not be below min_rad")
        return self

    def values(self) -> np.ndarray:
        return np.linspace(self.min_rad, self.max_rad, self.count)


class InitNoise(BaseModel):
    """Gaussian perturbation of the initial guess."""

    model_config = ConfigDict(extra="forbid")

    sigma_translation_m: float = Field(default=0.03, ge=0)
    sigma_rotation_rad: float = Field(default=float(np.deg2rad(10.0)), ge=0)


def default_truth_model() -> KinematicModel:
    """Roll-pan gimbal with a baseline of about 10 cm between the cameras."""
    return KinematicModel(
        tau_s=Pose6(0.02, -0.01, 0.03, -0.10, 0.005, -0.01),
        links=(
            DhLink(d=0.02, a=0.01, alpha=np.pi / 2),
            DhLink(d=0.03, a=0.015, alpha=-np.pi / 2),
        ),
        tau_d=Pose6(0.02, -0.03, 0.01, 0.01, -0.02, 0.03),
    )


class SimulationConfig(YamlModel):
    """Synthetic calibration or validation protocol."""

    model_config = ConfigDict(extra="forbid")

    truth_model: KinematicModelSchema = Field(
        default_factory=lambda: KinematicModelSchema.from_model(default_truth_model())
    )
    target: TargetSchema = Field(default_factory=lambda: TargetSchema(rows=7, cols=9))
    intrinsics_s: CameraIntrinsics = Field(
        default_factory=CameraIntrinsics.create_default
    )
    intrinsics_d: CameraIntrinsics = Field(
        default_factory=CameraIntrinsics.create_default
    )
    target_pose: Vec6 = Field(
        default=(0.05, -0.08, 0.03, -0.05, -0.075, 1.0),
        description="Target frame in the static camera frame",
    )
    target_poses: Optional[List[Vec6]] = Field(
        default=None, description="Per-set target poses overriding target_pose"
    )
    joint_grid: List[JointRange] = Field(
        default_factory=lambda: [
            JointRange(min_rad=-0.6, max_rad=0.6, count=9),
            JointRange(min_rad=-0.3, max_rad=0.3, count=9),
        ],
        min_length=1,
    )
    sampling: Literal["grid", "random"] = "grid"
    num_random_sets: int = Field(default=81, ge=1)
    pixel_noise_sigma: float = Field(default=0.4, ge=0, description="Pixels")
    init_noise: InitNoise = Field(default_factory=InitNoise)
    require_full_view: bool = Field(
        default=True, description="Reject sets unless every target point is visible"
    )
    rng_seed: int = 0

    @model_validator(mode="after")
    def _grid_matches_model(self) -> "SimulationConfig":
        if len(self.joint_grid) != len(self.truth_model.dh):
            raise ValueError(
                f"joint_grid has {len(self.joint_grid)} axes for "
                f"{len(self.truth_model.dh)} links"
            )
        return self

    @classmethod
    def create_default(cls) -> "SimulationConfig":
        """9 x 9 grid calibration protocol."""
        return cls()

    @classmethod
    def create_default_validation(cls) -> "SimulationConfig":
        """81 random joint states within the calibration grid ranges."""
        return cls(sampling="random", num_random_sets=81, rng_seed=1)

    def with_seed(self, seed: int) -> "SimulationConfig":
        return self.model_copy(update={"rng_seed": seed})


@dataclass(frozen=True)
class RejectedSet:
    index: int
    angles: JointState
    reason: str


@dataclass(frozen=True, eq=False)
class SimulationBundle:
    """Dataset plus the ground truth it was generated from."""

    dataset: Dataset
    truth_angles: Tuple[JointState, ...]
    truth_model: KinematicModel
    perturbed_init_model: KinematicModel
    perturbed_init_angles: Tuple[JointState, ...]
    rejected: Tuple[RejectedSet, ...] = field(default_factory=tuple)


def sample_configurations(grid: Sequence[JointRange]) -> List[JointState]:
    """Cartesian product of per-joint linspaces, first joint slowest."""
    axes = [axis.values() for axis in grid]
    return [JointState(values) for values in itertools.product(*axes)]


def sample_random_configurations(
    grid: Sequence[JointRange], count: int, rng: np.random.Generator
) -> List[JointState]:
    """Joint states drawn uniformly within each axis range."""
    low = np.array([axis.min_rad for axis in grid])
    high = np.array([axis.max_rad for axis in grid])
    return [JointState(row) for row in rng.uniform(low, high, size=(count, len(grid)))]


def perturb_initialization(
    truth_model: KinematicModel,
    truth_angles: Sequence[JointState],
    init_noise: InitNoise,
    rng: np.random.Generator,
) -> Tuple[KinematicModel, List[JointState]]:
    """Add Gaussian noise by parameter role; joint angles get the rotation sigma."""
    kin = pack_parameters(truth_model)
    sigma = np.where(
        translation_role_mask(truth_model.num_links),
        init_noise.sigma_translation_m,
        init_noise.sigma_rotation_rad,
    )
    noisy = kin + rng.standard_normal(kin.shape[0]) * sigma
    angles = np.array([s.angles for s in truth_angles], dtype=float).reshape(
        len(truth_angles), truth_model.num_links
    )
    angle_noise = rng.standard_normal(angles.shape) * init_noise.sigma_rotation_rad
    noisy_angles = angles + angle_noise
    return (
        unpack_parameters(noisy, truth_model.num_links),
        [JointState(row) for row in noisy_angles],
    )


def _configurations(config: SimulationConfig) -> List[JointState]:
    if config.sampling == "grid":
        return sample_configurations(config.joint_grid)
    rng = np.random.default_rng([config.rng_seed, SAMPLING_STREAM])
    return sample_random_configurations(config.joint_grid, config.num_random_sets, rng)


def _target_poses(config: SimulationConfig, count: int) -> List[RigidTransform]:
    if config.target_poses is None:
        return [pose_to_transform(Pose6.from_array(config.target_pose))] * count
    if len(config.target_poses) != count:
        raise ConfigError(
            f"target_poses has {len(config.target_poses)} entries for {count} sets"
        )
    return [pose_to_transform(Pose6.from_array(p)) for p in config.target_poses]


def _synthesize_set(
    config: SimulationConfig,
    truth: KinematicModel,
    index: int,
    beta: JointState,
    target_pose: RigidTransform,
    min_common_points: int,
    pnp_max_rms_px: float,
    use_true_points: bool,
) -> Tuple[Optional[MeasurementSet], Optional[str]]:
    """One snapshot, or (None, reason) when it is rejected."""
    target = config.target.to_target()
    grid = target_points(target)
    pose_s = target_pose
    pose_d = full_chain(truth, beta) @ target_pose
    p_s, p_d = apply(pose_s, grid), apply(pose_d, grid)

    visible = visible_mask(config.intrinsics_s, p_s)
    visible &= visible_mask(config.intrinsics_d, p_d)
    if config.require_full_view and not np.all(visible):
        return None, f"{int(np.sum(~visible))} target points out of view"
    ids = np.flatnonzero(visible)
    if ids.shape[0] < min_common_points:
        return None, f"{ids.shape[0]} target points visible in both cameras"

    rng = np.random.default_rng([config.rng_seed, index])
    sigma = config.pixel_noise_sigma
    q_s = project_points(config.intrinsics_s, p_s[ids])
    q_d = project_points(config.intrinsics_d, p_d[ids])
    q_s = q_s + rng.normal(0.0, sigma, q_s.shape) if sigma > 0 else q_s
    q_d = q_d + rng.normal(0.0, sigma, q_d.shape) if sigma > 0 else q_d

    try:
        mset = build_measurement_set(
            config.intrinsics_s,
            config.intrinsics_d,
            target,
            zip(ids.tolist(), q_s),
            zip(ids.tolist(), q_d),
            known_angles=beta,
            min_common_points=min_common_points,
            max_rms_px=pnp_max_rms_px,
            true_poses=(pose_s, pose_d) if use_true_points else None,
        )
    except DccError as e:
        return None, str(e)
    return mset, None


def synthesize_dataset(
    config: SimulationConfig,
    workers: int = 1,
    min_common_points: int = 4,
    pnp_max_rms_px: float = 5.0,
    use_true_points: bool = False,
) -> SimulationBundle:
    """Generate a dataset with known ground truth.

    Sets are kept in configuration order; measurement sets carry the true
    joint angles as encoder readings.

    Raises:
        AllSetsRejectedError: no configuration keeps the target in view.
    """
    truth = config.truth_model.to_model()
    configurations = _configurations(config)
    poses = _target_poses(config, len(configurations))

    def one(index: int) -> Tuple[Optional[MeasurementSet], Optional[str]]:
        return _synthesize_set(
            config,
            truth,
            index,
            configurations[index],
            poses[index],
            min_common_points,
            pnp_max_rms_px,
            use_true_points,
        )

    if workers > 1 and len(configurations) > 1:
        with ThreadPoolExecutor(max_workers=workers) as pool:
            outcomes = list(pool.map(one, range(len(configurations))))
    else:
        outcomes = [one(index) for index in range(len(configurations))]

    kept: List[MeasurementSet] = []
    kept_angles: List[JointState] = []
    rejected: List[RejectedSet] = []
    for index, (mset, reason) in enumerate(outcomes):
        if mset is None:
            rejected.append(RejectedSet(index, configurations[index], reason or ""))
            logger.warning("Rejected simulated set", index=index, reason=reason)
            continue
        kept.append(mset)
        kept_angles.append(configurations[index])

    if not kept:
        raise AllSetsRejectedError(
            f"All {len(configurations)} configurations were rejected; "
            "the target pose is incompatible with the joint grid"
        )

    init_rng = np.random.default_rng([config.rng_seed, INIT_STREAM])
    init_model, init_angles = perturb_initialization(
        truth, kept_angles, config.init_noise, init_rng
    )
    dataset = Dataset(
        intrinsics_s=config.intrinsics_s,
        intrinsics_d=config.intrinsics_d,
        target=config.target.to_target(),
        sets=tuple(kept),
    )
    logger.info(
        "Synthesized dataset",
        sets=len(kept),
        rejected=len(rejected),
        sampling=config.sampling,
        noise_px=config.pixel_noise_sigma,
    )
    return SimulationBundle(
        dataset=dataset,
        truth_angles=tuple(kept_angles),
        truth_model=truth,
        perturbed_init_model=init_model,
        perturbed_init_angles=tuple(init_angles),
        rejected=tuple(rejected),
    )


@dataclass(frozen=True, eq=False)
class StudyReport:
    """Calibration and validation outcomes laid out as the three study tables."""

    calibration: CalibrationResult
    validation: CalibrationResult
    calibration_truth: TruthErrorReport
    validation_truth: TruthErrorReport
    calibration_bundle: SimulationBundle
    validation_bundle: SimulationBundle

    def reprojection_rows(self) -> List[ReprojectionRow]:
        return [
            reprojection_row("calibration", self.calibration),
            reprojection_row("validation", self.validation),
        ]

    def joint_rows(self) -> List[JointRow]:
        return joint_error_rows(self.calibration_truth, self.validation_truth)

    def parameter_rows(self) -> List[ParameterRow]:
        return parameter_error_rows(self.calibration_truth)


def run_sim_study(
    config_cal: SimulationConfig,
    config_val: SimulationConfig,
    options: Optional[SolveOptions] = None,
    workers: int = 1,
    min_sets: int = 10,
    force: bool = False,
    min_common_points: int = 4,
    pnp_max_rms_px: float = 5.0,
    use_true_points: bool = False,
    align_gauge: bool = True,
) -> StudyReport:
    """Simulate, calibrate encoderless, validate and compare against truth."""
    if config_cal.truth_model != config_val.truth_model:
        raise ConfigError("Calibration and validation configs must share truth_model")

    synth = dict(
        workers=workers,
        min_common_points=min_common_points,
        pnp_max_rms_px=pnp_max_rms_px,
        use_true_points=use_true_points,
    )
    cal_bundle = synthesize_dataset(config_cal, **synth)
    val_bundle = synthesize_dataset(config_val, **synth)

    estimator = dict(workers=workers, min_sets=min_sets, force=force)
    calibration = calibrate_encoderless(
        cal_bundle.dataset,
        cal_bundle.perturbed_init_model,
        cal_bundle.perturbed_init_angles,
        options,
        **estimator,
    )
    validation = validate(
        val_bundle.dataset,
        calibration.estimate.model,
        val_bundle.perturbed_init_angles,
        options,
        **estimator,
    )
    report = StudyReport(
        calibration=calibration,
        validation=validation,
        calibration_truth=evaluate_against_truth(
            calibration, cal_bundle.truth_model, cal_bundle.truth_angles, align_gauge
        ),
        validation_truth=evaluate_against_truth(
            validation, val_bundle.truth_model, val_bundle.truth_angles, align_gauge
        ),
        calibration_bundle=cal_bundle,
        validation_bundle=val_bundle,
    )
    logger.info(
        "Finished simulation study",
        calibration_mean_px=calibration.stats.mean_px,
        validation_mean_px=validation.stats.mean_px,
    )
    return report

