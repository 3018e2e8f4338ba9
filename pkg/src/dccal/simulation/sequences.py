"""Synthetic tracking sequences: sinusoidal joint motion, a slowly swaying
body and a fixed landmark map in front of the static camera."""

from dataclasses import dataclass
from typing import List, Tuple

import numpy as np
import structlog
from pydantic import ConfigDict, Field, model_validator

from ..core.config import YamlModel
from ..estimators.tracker import RigExtrinsics, TrackerEstimate, TrackerFrame
from ..io.schemas import KinematicModelSchema, Vec6
from ..model.camera import CameraIntrinsics, project_points, visible_mask
from ..model.geometry import (
    Pose6,
    RigidTransform,
    apply,
    compose,
    invert,
    pose_to_transform,
    rot_y,
)
from ..model.kinematics import JointState, full_chain
from .simulator import InitNoise, default_truth_model

logger = structlog.get_logger(__name__)

PRIOR_STREAM = 2_000_003
MAP_STREAM = 2_000_033


class SequenceConfig(YamlModel):
    """Tracker sequence protocol."""

    model_config = ConfigDict(extra="forbid")

    truth_model: KinematicModelSchema = Field(
        default_factory=lambda: KinematicModelSchema.from_model(default_truth_model())
    )
    intrinsics_s: CameraIntrinsics = Field(
        default_factory=CameraIntrinsics.create_default
    )
    intrinsics_d: CameraIntrinsics = Field(
        default_factory=CameraIntrinsics.create_default
    )
    T_s_I: Vec6 = Field(default=(0.0, 0.0, 0.0, 0.0, 0.0, 0.0))
    num_frames: int = Field(default=200, ge=1)
    frame_rate_hz: float = Field(default=20.0, gt=0)
    num_landmarks: int = Field(default=100, ge=3)
    landmark_min_m: float = Field(default=5.0, gt=0)
    landmark_max_m: float = Field(default=15.0, gt=0)
    landmark_image_fraction: float = Field(
        default=0.8, gt=0, le=1, description="Share of the static image the map covers"
    )
    joint_amplitude_rad: List[float] = Field(default_factory=lambda: [0.4, 0.2])
    joint_frequency_hz: List[float] = Field(default_factory=lambda: [0.25, 0.15])
    joint_phase_rad: List[float] = Field(
        default_factory=lambda: [0.0, float(np.pi / 2)]
    )
    joint_offset_rad: List[float] = Field(default_factory=lambda: [0.0, 0.0])
    body_sway_m: float = Field(default=0.1, ge=0)
    body_yaw_rad: float = Field(default=0.05, ge=0)
    body_frequency_hz: float = Field(default=0.1, ge=0)
    pixel_noise_sigma: float = Field(default=0.4, ge=0)
    prior_noise: InitNoise = Field(
        default_factory=lambda: InitNoise(
            sigma_translation_m=0.0, sigma_rotation_rad=0.0
        )
    )
    rng_seed: int = 0

    @model_validator(mode="after")
    def _per_joint_lists(self) -> "SequenceConfig":
        links = len(self.truth_model.dh)
        for name in (
            "joint_amplitude_rad",
            "joint_frequency_hz",
            "joint_phase_rad",
            "joint_offset_rad",
        ):
            if len(getattr(self, name)) != links:
                raise ValueError(f"{name} needs {links} entries")
        if self.landmark_max_m < self.landmark_min_m:
            raise ValueError("landmark_max_m must not be below landmark_min_m")
        return self


@dataclass(frozen=True, eq=False)
class SequenceBundle:
    rig: RigExtrinsics
    frames: Tuple[TrackerFrame, ...]
    initial: TrackerEstimate
    truth: Tuple[TrackerEstimate, ...]


def joint_trajectory(config: SequenceConfig, t: float) -> JointState:
    amplitude = np.asarray(config.joint_amplitude_rad)
    frequency = np.asarray(config.joint_frequency_hz)
    phase = np.asarray(config.joint_phase_rad)
    offset = np.asarray(config.joint_offset_rad)
    return JointState(offset + amplitude * np.sin(2.0 * np.pi * frequency * t + phase))


def body_pose(config: SequenceConfig, t: float) -> RigidTransform:
    """World-to-body transform: lateral sway plus a small yaw oscillation."""
    wave = np.sin(2.0 * np.pi * config.body_frequency_hz * t)
    body_in_world = RigidTransform(
        rot_y(config.body_yaw_rad * wave),
        np.array([config.body_sway_m * wave, 0.0, 0.0]),
    )
    return invert(body_in_world)


def _landmark_map(
    config: SequenceConfig, s_from_world: RigidTransform, rng: np.random.Generator
) -> dict:
    cam = config.intrinsics_s
    margin = 0.5 * (1.0 - config.landmark_image_fraction)
    count = config.num_landmarks
    u = rng.uniform(margin * cam.width, (1.0 - margin) * cam.width, count)
    v = rng.uniform(margin * cam.height, (1.0 - margin) * cam.height, count)
    depth = rng.uniform(config.landmark_min_m, config.landmark_max_m, count)
    in_static = np.column_stack(
        [(u - cam.cx) / cam.fx * depth, (v - cam.cy) / cam.fy * depth, depth]
    )
    world = apply(invert(s_from_world), in_static)
    return {index: point for index, point in enumerate(world)}


def _observe(
    cam: CameraIntrinsics,
    camera_from_world: RigidTransform,
    landmarks: dict,
    sigma: float,
    rng: np.random.Generator,
) -> List[Tuple[int, np.ndarray]]:
    ids = np.array(sorted(landmarks))
    points = apply(camera_from_world, np.array([landmarks[i] for i in ids]))
    mask = visible_mask(cam, points)
    pixels = project_points(cam, points[mask]) if np.any(mask) else np.zeros((0, 2))
    if sigma > 0 and pixels.shape[0]:
        pixels = pixels + rng.normal(0.0, sigma, pixels.shape)
    return [(int(i), px) for i, px in zip(ids[mask], pixels)]


def simulate_sequence(config: SequenceConfig) -> SequenceBundle:
    """Frames with ground truth; each frame draws noise from (rng_seed, frame)."""
    model = config.truth_model.to_model()
    rig = RigExtrinsics(
        model=model,
        intrinsics_s=config.intrinsics_s,
        intrinsics_d=config.intrinsics_d,
        T_s_I=pose_to_transform(Pose6.from_array(config.T_s_I)),
    )
    first = compose(rig.T_s_I, body_pose(config, 0.0))
    landmarks = _landmark_map(
        config, first, np.random.default_rng([config.rng_seed, MAP_STREAM])
    )

    sigma = config.pixel_noise_sigma
    frames, truth = [], []
    for index in range(config.num_frames):
        t = index / config.frame_rate_hz
        beta = joint_trajectory(config, t)
        pose = body_pose(config, t)
        static = compose(rig.T_s_I, pose)
        dynamic = compose(full_chain(model, beta), static)
        rng = np.random.default_rng([config.rng_seed, index])
        frames.append(
            TrackerFrame(
                timestamp=t,
                landmarks=landmarks,
                obs_static=tuple(
                    _observe(config.intrinsics_s, static, landmarks, sigma, rng)
                ),
                obs_dynamic=tuple(
                    _observe(config.intrinsics_d, dynamic, landmarks, sigma, rng)
                ),
                truth_angles=beta,
                truth_pose=pose,
            )
        )
        truth.append(TrackerEstimate(pose, beta))

    rng = np.random.default_rng([config.rng_seed, PRIOR_STREAM])
    noise = config.prior_noise
    start = truth[0]
    offset = Pose6.from_array(
        np.concatenate(
            [
                rng.normal(0.0, noise.sigma_rotation_rad, 3),
                rng.normal(0.0, noise.sigma_translation_m, 3),
            ]
        )
    )
    initial = TrackerEstimate(
        T_I_W=compose(pose_to_transform(offset), start.T_I_W),
        beta=JointState(
            start.beta.as_array()
            + rng.normal(0.0, noise.sigma_rotation_rad, model.num_links)
        ),
    )
    logger.info(
        "Simulated tracking sequence",
        frames=len(frames),
        landmarks=len(landmarks),
        noise_px=config.pixel_noise_sigma,
    )
    return SequenceBundle(rig, tuple(frames), initial, tuple(truth))
