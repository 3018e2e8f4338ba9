"""Fiducial target, planar PnP and construction of measurement sets.

A measurement set pairs, for every target point seen by both cameras, the
pixel observations in each camera with the point's 3D position in each
camera frame (obtained by passing target points through the PnP pose).
"""

from dataclasses import dataclass
from typing import Dict, Iterable, Optional, Sequence, Tuple

import numpy as np
import structlog
from pydantic import BaseModel, ConfigDict, Field

from ..core.config import SolveOptions
from ..core.errors import (
    BehindCameraError,
    DegenerateConfigurationError,
    InsufficientDataError,
    InsufficientOverlapError,
    PnPConvergenceError,
    UnknownPointIdError,
)
from ..core.solver import LeastSquaresProblem, levenberg_marquardt
from .camera import (
    CameraIntrinsics,
    project_points,
    projection_jacobian,
    undistort_normalized,
)
from .geometry import (
    RigidTransform,
    apply,
    pose_matrix,
    pose_matrix_derivatives,
)
from .kinematics import JointState

logger = structlog.get_logger(__name__)

PNP_MIN_POINTS = 4
Observation = Tuple[int, Sequence[float]]


class FiducialTarget(BaseModel):
    """Planar grid of rows x cols points spaced `spacing` meters apart."""

    model_config = ConfigDict(frozen=True, extra="forbid")

    rows: int = Field(ge=2, description="Interior grid rows")
    cols: int = Field(ge=2, description="Interior grid columns")
    spacing: float = Field(default=0.025, gt=0, description="Point spacing, meters")

    @property
    def num_points(self) -> int:
        return self.rows * self.cols


def target_points(target: FiducialTarget) -> np.ndarray:
    """(rows*cols, 3) points in the target frame, row-major, id = r*cols + c."""
    rows, cols = np.meshgrid(
        np.arange(target.rows), np.arange(target.cols), indexing="ij"
    )
    return np.column_stack(
        [
            cols.ravel() * target.spacing,
            rows.ravel() * target.spacing,
            np.zeros(target.num_points),
        ]
    )


@dataclass(frozen=True, eq=False)
class MeasurementSet:
    """One synchronized snapshot Z_i restricted to the common point ids."""

    point_ids: np.ndarray
    q_s: np.ndarray
    q_d: np.ndarray
    p_s: np.ndarray
    p_d: np.ndarray
    known_angles: Optional[JointState] = None

    def __post_init__(self) -> None:
        ids = np.asarray(self.point_ids, dtype=int).reshape(-1)
        n = ids.shape[0]
        arrays = {
            "q_s": np.asarray(self.q_s, dtype=float).reshape(n, 2),
            "q_d": np.asarray(self.q_d, dtype=float).reshape(n, 2),
            "p_s": np.asarray(self.p_s, dtype=float).reshape(n, 3),
            "p_d": np.asarray(self.p_d, dtype=float).reshape(n, 3),
        }
        object.__setattr__(self, "point_ids", ids)
        for name, value in arrays.items():
            object.__setattr__(self, name, value)
        depths = (arrays["p_s"][:, 2], arrays["p_d"][:, 2])
        if n and any(np.any(z <= 0) for z in depths):
            raise BehindCameraError(
                "Measurement set holds points with non-positive depth"
            )

    @property
    def num_points(self) -> int:
        return int(self.point_ids.shape[0])


@dataclass(frozen=True, eq=False)
class Dataset:
    """Both cameras' intrinsics, the target and the ordered measurement sets."""

    intrinsics_s: CameraIntrinsics
    intrinsics_d: CameraIntrinsics
    target: FiducialTarget
    sets: Tuple[MeasurementSet, ...]

    def __post_init__(self) -> None:
        object.__setattr__(self, "sets", tuple(self.sets))
        if len(self.sets) < 1:
            raise InsufficientDataError("A dataset needs at least one measurement set")

    @property
    def num_sets(self) -> int:
        return len(self.sets)

    @property
    def has_known_angles(self) -> bool:
        return all(s.known_angles is not None for s in self.sets)


def _normalization(points: np.ndarray) -> np.ndarray:
    """Similarity moving the centroid to the origin with mean distance sqrt(2)."""
    centroid = points.mean(axis=0)
    mean_dist = np.mean(np.linalg.norm(points - centroid, axis=1))
    scale = np.sqrt(2.0) / mean_dist
    return np.array(
        [
            [scale, 0.0, -scale * centroid[0]],
            [0.0, scale, -scale * centroid[1]],
            [0.0, 0.0, 1.0],
        ]
    )


def estimate_homography(plane_xy: np.ndarray, image_xy: np.ndarray) -> np.ndarray:
    """Normalized DLT homography mapping plane_xy to image_xy."""
    t_plane = _normalization(plane_xy)
    t_image = _normalization(image_xy)
    ones = np.ones((plane_xy.shape[0], 1))
    src = (t_plane @ np.hstack([plane_xy, ones]).T).T
    dst = (t_image @ np.hstack([image_xy, ones]).T).T

    rows = []
    for (x, y, w), (u, v, s) in zip(src, dst):
        rows.append([0.0, 0.0, 0.0, -s * x, -s * y, -s * w, v * x, v * y, v * w])
        rows.append([s * x, s * y, s * w, 0.0, 0.0, 0.0, -u * x, -u * y, -u * w])
    _, _, vt = np.linalg.svd(np.asarray(rows))
    h_normalized = vt[-1].reshape(3, 3)
    return np.linalg.inv(t_image) @ h_normalized @ t_plane


def pose_from_homography(h: np.ndarray) -> RigidTransform:
    """Camera-from-plane pose of a plane-to-normalized-image homography."""
    h1, h2, h3 = h[:, 0], h[:, 1], h[:, 2]
    lam = 1.0 / np.mean([np.linalg.norm(h1), np.linalg.norm(h2)])
    if lam * h3[2] < 0:
        lam = -lam
    r1, r2 = lam * h1, lam * h2
    approx = np.column_stack([r1, r2, np.cross(r1, r2)])
    u, _, vt = np.linalg.svd(approx)
    rotation = u @ vt
    if np.linalg.det(rotation) < 0:
        rotation = u @ np.diag([1.0, 1.0, -1.0]) @ vt
    return RigidTransform(rotation, lam * h3)


def _check_planar_support(object_points: np.ndarray) -> None:
    if object_points.shape[0] < PNP_MIN_POINTS:
        raise DegenerateConfigurationError(
            f"PnP needs at least {PNP_MIN_POINTS} points, got {object_points.shape[0]}"
        )
    if np.any(np.abs(object_points[:, 2]) > 1e-9):
        raise DegenerateConfigurationError("Object points must lie on the z=0 plane")
    centered = object_points[:, :2] - object_points[:, :2].mean(axis=0)
    singular = np.linalg.svd(centered, compute_uv=False)
    if singular[0] == 0.0 or singular[1] < 1e-6 * singular[0]:
        raise DegenerateConfigurationError("Object points are collinear")


def solve_pnp(
    cam: CameraIntrinsics,
    object_points: np.ndarray,
    pixels: np.ndarray,
    max_rms_px: float = 5.0,
    options: Optional[SolveOptions] = None,
) -> RigidTransform:
    """Camera-from-target pose of a planar target.

    A homography initialization is refined by Levenberg-Marquardt on the pixel
    reprojection error.

    Raises:
        DegenerateConfigurationError: fewer than 4 or collinear points.
        PnPConvergenceError: refined per-point RMS above max_rms_px.
    """
    object_points = np.atleast_2d(np.asarray(object_points, dtype=float))
    pixels = np.atleast_2d(np.asarray(pixels, dtype=float))
    _check_planar_support(object_points)

    normalized = undistort_normalized(cam, pixels)
    homography = estimate_homography(object_points[:, :2], normalized)
    initial = pose_from_homography(homography)
    base = initial.matrix
    n = object_points.shape[0]

    def camera_points(delta: np.ndarray) -> np.ndarray:
        m = pose_matrix(delta) @ base
        return object_points @ m[:3, :3].T + m[:3, 3]

    def residual(delta: np.ndarray) -> np.ndarray:
        return (pixels - project_points(cam, camera_points(delta))).reshape(-1)

    def jacobian(delta: np.ndarray) -> np.ndarray:
        pts = camera_points(delta)
        proj = projection_jacobian(cam, pts)
        homogeneous = np.hstack([object_points, np.ones((n, 1))])
        columns = []
        for d in pose_matrix_derivatives(delta):
            d_points = homogeneous @ (d @ base)[:3, :].T
            columns.append(-np.einsum("nij,nj->ni", proj, d_points).reshape(-1))
        return np.column_stack(columns)

    report = levenberg_marquardt(
        LeastSquaresProblem(residual, np.zeros(6), jacobian, name="pnp"),
        options or SolveOptions(),
    )
    rms = float(np.sqrt(report.final_cost / n))
    if rms > max_rms_px:
        raise PnPConvergenceError(
            f"PnP reprojection RMS {rms:.3f} px exceeds {max_rms_px} px"
        )
    return RigidTransform.from_matrix(pose_matrix(report.parameters) @ base)


def _observation_map(
    observations: Iterable[Observation], num_points: int
) -> Dict[int, np.ndarray]:
    out = {}
    for i, px in observations:
        if not 0 <= int(i) < num_points:
            raise UnknownPointIdError(
                f"Point id {int(i)} outside the target's 0..{num_points - 1}"
            )
        out[int(i)] = np.asarray(px, dtype=float).reshape(2)
    return out


def build_measurement_set(
    cam_s: CameraIntrinsics,
    cam_d: CameraIntrinsics,
    target: FiducialTarget,
    obs_s: Iterable[Observation],
    obs_d: Iterable[Observation],
    known_angles: Optional[JointState] = None,
    min_common_points: int = PNP_MIN_POINTS,
    max_rms_px: float = 5.0,
    true_poses: Optional[Tuple[RigidTransform, RigidTransform]] = None,
) -> MeasurementSet:
    """Build Z_i from each camera's (id, pixel) observations.

    Each camera's pose is estimated from its full observation list; the 3D
    points are then taken for the ids observed by both cameras.
    `true_poses` = (T_s_t, T_d_t) bypasses PnP with known poses.

    Raises:
        InsufficientOverlapError: fewer than min_common_points shared ids.
        UnknownPointIdError: an id outside 0..rows*cols-1.
    """
    map_s = _observation_map(obs_s, target.num_points)
    map_d = _observation_map(obs_d, target.num_points)
    common = sorted(set(map_s) & set(map_d))
    if len(common) < min_common_points:
        raise InsufficientOverlapError(
            f"{len(common)} common target points, need {min_common_points}"
        )

    grid = target_points(target)
    ids_s, ids_d = sorted(map_s), sorted(map_d)
    if true_poses is None:
        pose_s = solve_pnp(
            cam_s, grid[ids_s], np.array([map_s[i] for i in ids_s]), max_rms_px
        )
        pose_d = solve_pnp(
            cam_d, grid[ids_d], np.array([map_d[i] for i in ids_d]), max_rms_px
        )
    else:
        pose_s, pose_d = true_poses

    common_points = grid[common]
    logger.debug("Built measurement set", common_points=len(common))
    return MeasurementSet(
        point_ids=np.array(common, dtype=int),
        q_s=np.array([map_s[i] for i in common]),
        q_d=np.array([map_d[i] for i in common]),
        p_s=apply(pose_s, common_points),
        p_d=apply(pose_d, common_points),
        known_angles=known_angles,
    )

