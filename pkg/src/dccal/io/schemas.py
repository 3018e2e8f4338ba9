"""File schemas: datasets, calibration results, truth sidecars and sequences.

Every file carries a schema_version. Angles are radians, lengths meters and
image coordinates pixels; field names state the unit.
"""

from typing import List, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator

from ..core.config import YamlModel
from ..core.solver import SolveReport, Termination
from ..estimators.base import CalibrationEstimate, CalibrationResult
from ..estimators.residuals import ReprojectionStats
from ..model.camera import CameraIntrinsics
from ..model.geometry import Pose6
from ..model.kinematics import DhLink, JointState, KinematicModel
from ..model.measurement import Dataset, FiducialTarget, MeasurementSet

SCHEMA_VERSION = 1

Vec2 = Tuple[float, float]
Vec3 = Tuple[float, float, float]
Vec6 = Tuple[float, float, float, float, float, float]


class VersionedFile(YamlModel):
    """Top-level file with a schema version check."""

    model_config = ConfigDict(extra="forbid")

    schema_version: int = Field(
        default=SCHEMA_VERSION, description="File format version"
    )

    @field_validator("schema_version")
    @classmethod
    def _known_version(cls, value: int) -> int:
        if value != SCHEMA_VERSION:
            raise ValueError(
                f"unsupported schema_version {value}, expected {SCHEMA_VERSION}"
            )
        return value


class KinematicModelSchema(BaseModel):
    """tau_d, DH rows (d, a, alpha) and tau_s.

    Poses are (r_x, r_y, r_z, t_x, t_y, t_z).
    """

    model_config = ConfigDict(extra="forbid")

    tau_d: Vec6 = Field(description="End-effector to dynamic camera pose")
    dh: List[Vec3] = Field(min_length=1, description="Per-link (d_m, a_m, alpha_rad)")
    tau_s: Vec6 = Field(description="Static camera to mechanism base pose")

    @classmethod
    def from_model(cls, model: KinematicModel) -> "KinematicModelSchema":
        return cls(
            tau_d=tuple(model.tau_d.as_array().tolist()),
            dh=[(link.d, link.a, link.alpha) for link in model.links],
            tau_s=tuple(model.tau_s.as_array().tolist()),
        )

    def to_model(self) -> KinematicModel:
        return KinematicModel(
            tau_s=Pose6.from_array(self.tau_s).canonical(),
            links=tuple(DhLink(d, a, alpha).canonical() for d, a, alpha in self.dh),
            tau_d=Pose6.from_array(self.tau_d).canonical(),
        )


class TargetSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    rows: int = Field(ge=2)
    cols: int = Field(ge=2)
    spacing_m: float = Field(default=0.025, gt=0)

    @classmethod
    def from_target(cls, target: FiducialTarget) -> "TargetSchema":
        return cls(rows=target.rows, cols=target.cols, spacing_m=target.spacing)

    def to_target(self) -> FiducialTarget:
        return FiducialTarget(rows=self.rows, cols=self.cols, spacing=self.spacing_m)


class PointSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int = Field(ge=0)
    q_s_px: Vec2
    q_d_px: Vec2
    p_s_m: Vec3
    p_d_m: Vec3


class SetSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    known_angles_rad: Optional[List[float]] = None
    points: List[PointSchema] = Field(default_factory=list)

    @classmethod
    def from_set(cls, mset: MeasurementSet) -> "SetSchema":
        points = [
            PointSchema(
                id=int(i),
                q_s_px=tuple(mset.q_s[j].tolist()),
                q_d_px=tuple(mset.q_d[j].tolist()),
                p_s_m=tuple(mset.p_s[j].tolist()),
                p_d_m=tuple(mset.p_d[j].tolist()),
            )
            for j, i in enumerate(mset.point_ids)
        ]
        known = None if mset.known_angles is None else list(mset.known_angles.angles)
        return cls(known_angles_rad=known, points=points)

    def to_set(self) -> MeasurementSet:
        known = None
        if self.known_angles_rad is not None:
            known = JointState(self.known_angles_rad)
        return MeasurementSet(
            point_ids=np.array([p.id for p in self.points], dtype=int),
            q_s=np.array([p.q_s_px for p in self.points], dtype=float),
            q_d=np.array([p.q_d_px for p in self.points], dtype=float),
            p_s=np.array([p.p_s_m for p in self.points], dtype=float),
            p_d=np.array([p.p_d_m for p in self.points], dtype=float),
            known_angles=known,
        )


class DatasetFile(VersionedFile):
    """Measurement sets of one calibration or validation run."""

    intrinsics_s: CameraIntrinsics
    intrinsics_d: CameraIntrinsics
    target: TargetSchema
    sets: List[SetSchema] = Field(min_length=1)

    @classmethod
    def from_dataset(cls, dataset: Dataset) -> "DatasetFile":
        return cls(
            intrinsics_s=dataset.intrinsics_s,
            intrinsics_d=dataset.intrinsics_d,
            target=TargetSchema.from_target(dataset.target),
            sets=[SetSchema.from_set(s) for s in dataset.sets],
        )

    def to_dataset(self) -> Dataset:
        return Dataset(
            intrinsics_s=self.intrinsics_s,
            intrinsics_d=self.intrinsics_d,
            target=self.target.to_target(),
            sets=tuple(s.to_set() for s in self.sets),
        )


class StatsSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    mean_px: float
    std_px: float
    n_points: int
    rms_px: float = 0.0
    mean_static_px: float = 0.0
    mean_dynamic_px: float = 0.0
    per_set_mean_px: List[float] = Field(default_factory=list)

    @classmethod
    def from_stats(cls, stats: ReprojectionStats) -> "StatsSchema":
        return cls(
            mean_px=stats.mean_px,
            std_px=stats.std_px,
            n_points=stats.n_points,
            rms_px=stats.rms_px,
            mean_static_px=stats.mean_static_px,
            mean_dynamic_px=stats.mean_dynamic_px,
            per_set_mean_px=list(stats.per_set_mean_px),
        )

    def to_stats(self) -> ReprojectionStats:
        return ReprojectionStats(
            mean_px=self.mean_px,
            std_px=self.std_px,
            n_points=self.n_points,
            rms_px=self.rms_px,
            mean_static_px=self.mean_static_px,
            mean_dynamic_px=self.mean_dynamic_px,
            per_set_mean_px=tuple(self.per_set_mean_px),
        )


class SolverSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    iterations: int
    initial_cost: float
    final_cost: float
    termination: Termination
    gradient_max: float = 0.0


class CalibrationResultFile(VersionedFile):
    """Estimated chain, joint angles, residual statistics and solver summary."""

    mode: str
    L: int = Field(ge=1, description="Number of joints")
    tau_d: Vec6
    dh: List[Vec3]
    tau_s: Vec6
    joint_angles_rad: List[List[float]]
    stats: StatsSchema
    solver: SolverSchema

    @classmethod
    def from_result(cls, result: CalibrationResult) -> "CalibrationResultFile":
        estimate = result.estimate
        model = KinematicModelSchema.from_model(estimate.model)
        report = result.report
        return cls(
            mode=estimate.mode,
            L=estimate.model.num_links,
            tau_d=model.tau_d,
            dh=model.dh,
            tau_s=model.tau_s,
            joint_angles_rad=[list(s.angles) for s in estimate.joint_trajectory],
            stats=StatsSchema.from_stats(result.stats),
            solver=SolverSchema(
                iterations=report.iterations,
                initial_cost=report.initial_cost,
                final_cost=report.final_cost,
                termination=report.termination,
                gradient_max=report.gradient_max,
            ),
        )

    def to_result(self) -> CalibrationResult:
        model = KinematicModelSchema(tau_d=self.tau_d, dh=self.dh, tau_s=self.tau_s)
        estimate = CalibrationEstimate(
            model=model.to_model(),
            joint_trajectory=tuple(JointState(a) for a in self.joint_angles_rad),
            mode=self.mode,
        )
        report = SolveReport(
            parameters=np.zeros(0),
            initial_cost=self.solver.initial_cost,
            final_cost=self.solver.final_cost,
            iterations=self.solver.iterations,
            termination=self.solver.termination,
            gradient_max=self.solver.gradient_max,
        )
        return CalibrationResult(estimate, report, self.stats.to_stats())


class RejectedSetSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    index: int
    angles_rad: List[float]
    reason: str


class TruthFile(VersionedFile):
    """Ground truth and perturbed initialization written next to a simulated dataset."""

    truth_model: KinematicModelSchema
    truth_angles_rad: List[List[float]]
    init_model: KinematicModelSchema
    init_angles_rad: List[List[float]]


class InitFile(VersionedFile):
    """Initial guess for calibration or validation."""

    model: KinematicModelSchema
    joint_angles_rad: Optional[List[List[float]]] = None


class RejectionReportFile(VersionedFile):
    kept: int
    rejected: List[RejectedSetSchema] = Field(default_factory=list)


class LandmarkSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int
    p_w_m: Vec3


class ObservationSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    id: int
    px: Vec2


class FrameSchema(BaseModel):
    model_config = ConfigDict(extra="forbid")

    timestamp_s: float
    obs_static: List[ObservationSchema] = Field(default_factory=list)
    obs_dynamic: List[ObservationSchema] = Field(default_factory=list)
    truth_angles_rad: Optional[List[float]] = None
    truth_pose: Optional[Vec6] = Field(
        default=None, description="World to body pose, when known"
    )


class SequenceFile(VersionedFile):
    """Landmark map, per-frame observations and optional ground truth."""

    intrinsics_s: CameraIntrinsics
    intrinsics_d: CameraIntrinsics
    T_s_I: Vec6 = Field(
        default=(0.0, 0.0, 0.0, 0.0, 0.0, 0.0), description="Body to static camera pose"
    )
    landmarks: List[LandmarkSchema]
    frames: List[FrameSchema] = Field(min_length=1)
    initial_pose: Vec6 = Field(description="Prior world to body pose of frame 0")
    initial_angles_rad: List[float] = Field(description="Prior joint angles of frame 0")
