"""Frame-by-frame body pose and joint angle tracking with a calibrated chain.

Each frame minimizes the reprojection error of known world landmarks in the
static camera (through T_s_I) and in the dynamic camera (through the joint
dependent T_d_I(beta)) over the 6 body pose parameters and the L joint
angles. The previous frame's estimate seeds the next.
"""

from dataclasses import dataclass, field
from enum import Enum
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..core.config import SolveOptions
from ..core.errors import (
    ConfigError,
    DccError,
    InsufficientObservationsError,
    NonConvergenceError,
)
from ..core.solver import (
    LeastSquaresProblem,
    SolveReport,
    Termination,
    levenberg_marquardt,
)
from ..model.camera import CameraIntrinsics, project_points, projection_jacobian
from ..model.geometry import (
    RigidTransform,
    apply,
    compose,
    pose_matrix,
    pose_matrix_derivatives,
    transform_to_pose,
    wrap_angles,
)
from ..model.kinematics import (
    JointState,
    KinematicModel,
    check_joints,
    chain_with_derivatives,
    full_chain,
    pack_parameters,
)

logger = structlog.get_logger(__name__)

POSE_SIZE = 6
MIN_STATIC_OBSERVATIONS = 3


class CameraRole(str, Enum):
    STATIC = "static"
    DYNAMIC = "dynamic"


@dataclass(frozen=True, eq=False)
class RigExtrinsics:
    """Calibrated chain, camera intrinsics and the body-to-static-camera transform."""

    model: KinematicModel
    intrinsics_s: CameraIntrinsics = field(
        default_factory=CameraIntrinsics.create_default
    )
    intrinsics_d: CameraIntrinsics = field(
        default_factory=CameraIntrinsics.create_default
    )
    T_s_I: RigidTransform = field(default_factory=RigidTransform.identity)

    def intrinsics(self, role: CameraRole) -> CameraIntrinsics:
        return self.intrinsics_s if role == CameraRole.STATIC else self.intrinsics_d


Observation = Tuple[int, Sequence[float]]


@dataclass(frozen=True, eq=False)
class TrackerFrame:
    """Landmark map and the pixel observations of one timestep."""

    timestamp: float
    landmarks: Dict[int, np.ndarray]
    obs_static: Tuple[Observation, ...] = ()
    obs_dynamic: Tuple[Observation, ...] = ()
    truth_angles: Optional[JointState] = None
    truth_pose: Optional[RigidTransform] = None

    def __post_init__(self) -> None:
        landmarks = {
            int(k): np.asarray(v, dtype=float).reshape(3)
            for k, v in self.landmarks.items()
        }
        object.__setattr__(self, "landmarks", landmarks)
        for name in ("obs_static", "obs_dynamic"):
            observations = tuple(
                (int(i), np.asarray(px, dtype=float).reshape(2))
                for i, px in getattr(self, name)
            )
            unknown = [i for i, _ in observations if i not in landmarks]
            if unknown:
                raise ConfigError(
                    f"Frame at t={self.timestamp}: {name} references unknown "
                    f"landmarks {unknown[:5]}"
                )
            object.__setattr__(self, name, observations)

    def points(self, role: CameraRole) -> Tuple[np.ndarray, np.ndarray]:
        """(N, 3) world points and (N, 2) pixels observed by one camera."""
        static = role == CameraRole.STATIC
        observations = self.obs_static if static else self.obs_dynamic
        if not observations:
            return np.zeros((0, 3)), np.zeros((0, 2))
        world = np.array([self.landmarks[i] for i, _ in observations])
        pixels = np.array([px for _, px in observations])
        return world, pixels


@dataclass(frozen=True, eq=False)
class TrackerEstimate:
    """World-to-body transform and joint state."""

    T_I_W: RigidTransform
    beta: JointState

    def as_vector(self) -> np.ndarray:
        """[pose6, beta]; raises SingularityError at pitch +/- pi/2."""
        return np.concatenate(
            [transform_to_pose(self.T_I_W).as_array(), self.beta.as_array()]
        )

    @classmethod
    def from_vector(cls, x: np.ndarray) -> "TrackerEstimate":
        return cls(
            RigidTransform.from_matrix(pose_matrix(x[:POSE_SIZE])),
            JointState(x[POSE_SIZE:]),
        )


@dataclass
class AngleTrackReport:
    """Per-joint RMSE against ground truth and the frames that failed."""

    num_frames: int
    per_joint_rmse_rad: Optional[Tuple[float, ...]] = None
    failed_frames: List[int] = field(default_factory=list)
    reports: List[Optional[SolveReport]] = field(default_factory=list)


def dynamic_extrinsic(rig: RigExtrinsics, beta: JointState) -> RigidTransform:
    """T_d_I(beta) = T(tau_d) FK(beta) T(tau_s) T_s_I."""
    return compose(full_chain(rig.model, beta), rig.T_s_I)


def _camera_from_world(
    rig: RigExtrinsics, estimate: TrackerEstimate, role: CameraRole
) -> RigidTransform:
    static = compose(rig.T_s_I, estimate.T_I_W)
    if role == CameraRole.STATIC:
        return static
    return compose(full_chain(rig.model, estimate.beta), static)


def tracker_residual(
    rig: RigExtrinsics,
    estimate: TrackerEstimate,
    role: CameraRole,
    landmark: np.ndarray,
    z: Sequence[float],
) -> np.ndarray:
    """z - psi(T_c_W p_W) for the static or the dynamic camera, pixels."""
    point = apply(_camera_from_world(rig, estimate, role), np.asarray(landmark, float))
    projected = project_points(rig.intrinsics(role), point.reshape(1, 3))[0]
    return np.asarray(z, dtype=float).reshape(2) - projected


def joint_jacobian(
    rig: RigExtrinsics,
    estimate: TrackerEstimate,
    landmark: np.ndarray,
    role: CameraRole = CameraRole.DYNAMIC,
) -> np.ndarray:
    """2 x L derivative of tracker_residual w.r.t. the joint angles."""
    num_links = rig.model.num_links
    if role == CameraRole.STATIC:
        return np.zeros((2, num_links))
    in_static = apply(
        compose(rig.T_s_I, estimate.T_I_W), np.asarray(landmark, float).reshape(1, 3)
    )[0]
    chain, _, d_beta = chain_with_derivatives(
        pack_parameters(rig.model), num_links, estimate.beta
    )
    in_dynamic = chain[:3, :3] @ in_static + chain[:3, 3]
    d_points = d_beta[:, :3, :3] @ in_static + d_beta[:, :3, 3]
    proj = projection_jacobian(rig.intrinsics_d, in_dynamic.reshape(1, 3))[0]
    return -proj @ d_points.T


class FrameProblem:
    """Stacked static then dynamic residuals of one frame over [pose6, beta].

    The pose parameters act on the left of `anchor`, so T_I_W(x) =
    T(x[:6]) @ anchor. With the prior as anchor the solve starts at x[:6] = 0
    and never decomposes the prior into Euler angles.
    """

    def __init__(
        self,
        rig: RigExtrinsics,
        frame: TrackerFrame,
        anchor: Optional[RigidTransform] = None,
    ):
        self.rig = rig
        self.num_links = rig.model.num_links
        self.kin = pack_parameters(rig.model)
        self.world_s, self.pixels_s = frame.points(CameraRole.STATIC)
        self.world_d, self.pixels_d = frame.points(CameraRole.DYNAMIC)
        if anchor is not None:
            self.world_s = apply(anchor, self.world_s)
            self.world_d = apply(anchor, self.world_d)
        self.anchor = anchor
        self.s_from_body = rig.T_s_I.matrix

    def start(self, prior: TrackerEstimate) -> np.ndarray:
        if self.anchor is None:
            return prior.as_vector()
        return np.concatenate([np.zeros(POSE_SIZE), prior.beta.as_array()])

    def estimate(self, x: np.ndarray) -> TrackerEstimate:
        local = TrackerEstimate.from_vector(x)
        if self.anchor is None:
            return local
        return TrackerEstimate(compose(local.T_I_W, self.anchor), local.beta)

    def _body_points(self, x: np.ndarray, world: np.ndarray) -> np.ndarray:
        m = pose_matrix(x[:POSE_SIZE])
        return world @ m[:3, :3].T + m[:3, 3]

    def residual(self, x: np.ndarray) -> np.ndarray:
        estimate = TrackerEstimate.from_vector(x)
        parts = []
        if self.world_s.shape[0]:
            t = compose(self.rig.T_s_I, estimate.T_I_W)
            projected = project_points(self.rig.intrinsics_s, apply(t, self.world_s))
            parts.append(self.pixels_s - projected)
        if self.world_d.shape[0]:
            t = _camera_from_world(self.rig, estimate, CameraRole.DYNAMIC)
            projected = project_points(self.rig.intrinsics_d, apply(t, self.world_d))
            parts.append(self.pixels_d - projected)
        return np.concatenate([p.reshape(-1) for p in parts]) if parts else np.zeros(0)

    def _pose_block(
        self,
        x: np.ndarray,
        world: np.ndarray,
        left: np.ndarray,
        cam: CameraIntrinsics,
    ) -> Tuple[np.ndarray, np.ndarray]:
        """Projection Jacobians and pose columns for points mapped by left @ T_I_W."""
        body = self._body_points(x, world)
        in_camera = body @ left[:3, :3].T + left[:3, 3]
        proj = projection_jacobian(cam, in_camera)
        homogeneous = np.hstack([world, np.ones((world.shape[0], 1))])
        columns = []
        for d in pose_matrix_derivatives(x[:POSE_SIZE]):
            d_points = homogeneous @ (left @ d)[:3, :].T
            columns.append(-np.einsum("nij,nj->ni", proj, d_points).reshape(-1))
        return proj, np.column_stack(columns)

    def jacobian(self, x: np.ndarray) -> np.ndarray:
        blocks = []
        if self.world_s.shape[0]:
            _, pose_cols = self._pose_block(
                x, self.world_s, self.s_from_body, self.rig.intrinsics_s
            )
            blocks.append(
                np.hstack([pose_cols, np.zeros((pose_cols.shape[0], self.num_links))])
            )
        if self.world_d.shape[0]:
            chain, _, d_beta = chain_with_derivatives(
                self.kin, self.num_links, x[POSE_SIZE:]
            )
            proj, pose_cols = self._pose_block(
                x, self.world_d, chain @ self.s_from_body, self.rig.intrinsics_d
            )
            body = self._body_points(x, self.world_d)
            in_static = body @ self.s_from_body[:3, :3].T + self.s_from_body[:3, 3]
            d_points = np.einsum("kij,nj->nki", d_beta[:, :3, :3], in_static) + d_beta[
                None, :, :3, 3
            ]
            joint_cols = -np.einsum("nij,nkj->nik", proj, d_points).reshape(
                -1, self.num_links
            )
            blocks.append(np.hstack([pose_cols, joint_cols]))
        return np.vstack(blocks)


def check_frame(rig: RigExtrinsics, frame: TrackerFrame) -> None:
    """Raise InsufficientObservationsError unless the frame is solvable."""
    need_dynamic = max(3, rig.model.num_links + 1)
    static, dynamic = len(frame.obs_static), len(frame.obs_dynamic)
    if static < MIN_STATIC_OBSERVATIONS or dynamic < need_dynamic:
        raise InsufficientObservationsError(
            f"Frame at t={frame.timestamp}: {static} static and "
            f"{dynamic} dynamic observations, need "
            f"{MIN_STATIC_OBSERVATIONS} and {need_dynamic}"
        )


def estimate_frame(
    rig: RigExtrinsics,
    frame: TrackerFrame,
    prior: TrackerEstimate,
    opts: Optional[SolveOptions] = None,
) -> Tuple[TrackerEstimate, SolveReport]:
    """Refine body pose and joint angles of one frame starting from the prior.

    Raises:
        InsufficientObservationsError: too few observations in either camera.
        NonConvergenceError: the solver hit its iteration cap.
    """
    check_joints(rig.model.num_links, prior.beta)
    check_frame(rig, frame)
    problem = FrameProblem(rig, frame, anchor=prior.T_I_W)
    report = levenberg_marquardt(
        LeastSquaresProblem(
            problem.residual, problem.start(prior), problem.jacobian, name="tracker"
        ),
        opts,
    )
    if report.termination == Termination.MAX_ITERATIONS:
        raise NonConvergenceError(
            f"Frame at t={frame.timestamp} did not converge in {report.iterations} "
            "iterations"
        )
    return problem.estimate(report.parameters), report


def track_sequence(
    rig: RigExtrinsics,
    frames: Sequence[TrackerFrame],
    initial: TrackerEstimate,
    opts: Optional[SolveOptions] = None,
) -> Tuple[List[TrackerEstimate], AngleTrackReport]:
    """Estimate every frame in order, each seeded by the previous estimate.

    A frame that fails keeps its prior as the estimate and is listed in the
    report; tracking continues with the next frame.
    """
    estimates: List[TrackerEstimate] = []
    report = AngleTrackReport(num_frames=len(frames))
    prior = initial
    for index, frame in enumerate(frames):
        try:
            estimate, solve = estimate_frame(rig, frame, prior, opts)
        except DccError as e:
            logger.warning(
                "Tracker frame failed",
                frame=index,
                timestamp=frame.timestamp,
                error=str(e),
            )
            report.failed_frames.append(index)
            report.reports.append(None)
            estimate = prior
        else:
            report.reports.append(solve)
        estimates.append(estimate)
        prior = estimate

    truth = [
        (f.truth_angles.as_array(), e.beta.as_array())
        for f, e in zip(frames, estimates)
        if f.truth_angles is not None
    ]
    if truth:
        errors = wrap_angles(np.array([est - ref for ref, est in truth]))
        report.per_joint_rmse_rad = tuple(
            float(v) for v in np.sqrt(np.mean(errors**2, axis=0))
        )
    logger.info(
        "Tracked sequence",
        frames=len(frames),
        failed=len(report.failed_frames),
        rmse_rad=report.per_joint_rmse_rad,
    )
    return estimates, report