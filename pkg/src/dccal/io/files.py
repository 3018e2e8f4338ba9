"""Reading and writing the toolkit's files."""

from dataclasses import dataclass
from pathlib import Path
from typing import List, Optional, Sequence, Tuple, Union

import structlog

from ..estimators.base import CalibrationResult
from ..estimators.tracker import TrackerEstimate, TrackerFrame
from ..model.camera import CameraIntrinsics
from ..model.geometry import (
    Pose6,
    RigidTransform,
    pose_to_transform,
    transform_to_pose,
)
from ..model.kinematics import JointState, KinematicModel
from ..model.measurement import Dataset
from .schemas import (
    CalibrationResultFile,
    DatasetFile,
    FrameSchema,
    InitFile,
    KinematicModelSchema,
    LandmarkSchema,
    ObservationSchema,
    RejectedSetSchema,
    RejectionReportFile,
    SequenceFile,
    TruthFile,
)

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]


def _angles(rows: Sequence[Sequence[float]]) -> List[JointState]:
    return [JointState(row) for row in rows]


def _rows(states: Sequence[JointState]) -> List[List[float]]:
    return [list(s.angles) for s in states]


def save_dataset(path: PathLike, dataset: Dataset) -> None:
    DatasetFile.from_dataset(dataset).save_to_file(Path(path))
    logger.debug("Wrote dataset", path=str(path), sets=dataset.num_sets)


def load_dataset(path: PathLike) -> Dataset:
    return DatasetFile.from_file(Path(path)).to_dataset()


def save_result(path: PathLike, result: CalibrationResult) -> None:
    CalibrationResultFile.from_result(result).save_to_file(Path(path))
    logger.debug("Wrote calibration result", path=str(path), mode=result.estimate.mode)


def load_result(path: PathLike) -> CalibrationResult:
    return CalibrationResultFile.from_file(Path(path)).to_result()


@dataclass(frozen=True)
class TruthRecord:
    truth_model: KinematicModel
    truth_angles: Tuple[JointState, ...]
    init_model: KinematicModel
    init_angles: Tuple[JointState, ...]


def save_truth(
    path: PathLike,
    truth_model: KinematicModel,
    truth_angles: Sequence[JointState],
    init_model: KinematicModel,
    init_angles: Sequence[JointState],
) -> None:
    TruthFile(
        truth_model=KinematicModelSchema.from_model(truth_model),
        truth_angles_rad=_rows(truth_angles),
        init_model=KinematicModelSchema.from_model(init_model),
        init_angles_rad=_rows(init_angles),
    ).save_to_file(Path(path))


def load_truth(path: PathLike) -> TruthRecord:
    data = TruthFile.from_file(Path(path))
    return TruthRecord(
        truth_model=data.truth_model.to_model(),
        truth_angles=tuple(_angles(data.truth_angles_rad)),
        init_model=data.init_model.to_model(),
        init_angles=tuple(_angles(data.init_angles_rad)),
    )


def save_init(
    path: PathLike,
    model: KinematicModel,
    angles: Optional[Sequence[JointState]] = None,
) -> None:
    InitFile(
        model=KinematicModelSchema.from_model(model),
        joint_angles_rad=None if angles is None else _rows(angles),
    ).save_to_file(Path(path))


def load_init(path: PathLike) -> Tuple[KinematicModel, Optional[List[JointState]]]:
    data = InitFile.from_file(Path(path))
    angles = None if data.joint_angles_rad is None else _angles(data.joint_angles_rad)
    return data.model.to_model(), angles


def save_rejections(path: PathLike, kept: int, rejected: Sequence) -> None:
    """Rejection report; rejected items carry index, angles and reason."""
    RejectionReportFile(
        kept=kept,
        rejected=[
            RejectedSetSchema(
                index=r.index, angles_rad=list(r.angles.angles), reason=r.reason
            )
            for r in rejected
        ],
    ).save_to_file(Path(path))


@dataclass(frozen=True, eq=False)
class SequenceRecord:
    intrinsics_s: CameraIntrinsics
    intrinsics_d: CameraIntrinsics
    T_s_I: RigidTransform
    frames: Tuple[TrackerFrame, ...]
    initial: TrackerEstimate


def _pose_tuple(t: RigidTransform) -> Tuple[float, ...]:
    return tuple(transform_to_pose(t).as_array().tolist())


def _transform(values: Sequence[float]) -> RigidTransform:
    return pose_to_transform(Pose6.from_array(values))


def _observations(observations: Sequence) -> List[ObservationSchema]:
    return [ObservationSchema(id=i, px=tuple(px.tolist())) for i, px in observations]


def save_sequence(
    path: PathLike,
    intrinsics_s: CameraIntrinsics,
    intrinsics_d: CameraIntrinsics,
    T_s_I: RigidTransform,
    frames: Sequence[TrackerFrame],
    initial: TrackerEstimate,
) -> None:
    landmarks = frames[0].landmarks if frames else {}
    SequenceFile(
        intrinsics_s=intrinsics_s,
        intrinsics_d=intrinsics_d,
        T_s_I=_pose_tuple(T_s_I),
        landmarks=[
            LandmarkSchema(id=i, p_w_m=tuple(p.tolist()))
            for i, p in sorted(landmarks.items())
        ],
        frames=[
            FrameSchema(
                timestamp_s=f.timestamp,
                obs_static=_observations(f.obs_static),
                obs_dynamic=_observations(f.obs_dynamic),
                truth_angles_rad=(
                    None if f.truth_angles is None else list(f.truth_angles.angles)
                ),
                truth_pose=None if f.truth_pose is None else _pose_tuple(f.truth_pose),
            )
            for f in frames
        ],
        initial_pose=_pose_tuple(initial.T_I_W),
        initial_angles_rad=list(initial.beta.angles),
    ).save_to_file(Path(path))


def load_sequence(path: PathLike) -> SequenceRecord:
    data = SequenceFile.from_file(Path(path))
    landmarks = {lm.id: lm.p_w_m for lm in data.landmarks}
    frames = tuple(
        TrackerFrame(
            timestamp=f.timestamp_s,
            landmarks=landmarks,
            obs_static=tuple((o.id, o.px) for o in f.obs_static),
            obs_dynamic=tuple((o.id, o.px) for o in f.obs_dynamic),
            truth_angles=(
                None if f.truth_angles_rad is None else JointState(f.truth_angles_rad)
            ),
            truth_pose=None if f.truth_pose is None else _transform(f.truth_pose),
        )
        for f in data.frames
    )
    return SequenceRecord(
        intrinsics_s=data.intrinsics_s,
        intrinsics_d=data.intrinsics_d,
        T_s_I=_transform(data.T_s_I),
        frames=frames,
        initial=TrackerEstimate(
            _transform(data.initial_pose), JointState(data.initial_angles_rad)
        ),
    )
