"""Camera-to-camera reprojection residuals and their analytic Jacobians.

Per measurement set, residuals are stacked point by point as
[e_d(u), e_d(v), e_s(u), e_s(v)], where e_d reprojects static-frame points
into the dynamic camera and e_s reprojects dynamic-frame points into the
static camera.
"""

from dataclasses import dataclass
from typing import Optional, Sequence, Tuple

import numpy as np

from ..core.errors import ShapeMismatchError
from ..model.camera import CameraIntrinsics, project_points, projection_jacobian
from ..model.geometry import apply, invert
from ..model.kinematics import (
    JointState,
    KinematicModel,
    chain_matrix,
    chain_with_derivatives,
    full_chain,
)
from ..model.measurement import MeasurementSet

RESIDUALS_PER_POINT = 4


def residual_dynamic(
    model: KinematicModel,
    beta: JointState,
    intrinsics_d: CameraIntrinsics,
    p_s: np.ndarray,
    z_d: np.ndarray,
) -> np.ndarray:
    """e = z_d - psi_d(T_ds(pi, beta) p_s), pixels."""
    point = apply(full_chain(model, beta), np.asarray(p_s, dtype=float).reshape(1, 3))
    projected = project_points(intrinsics_d, point)[0]
    return np.asarray(z_d, dtype=float).reshape(2) - projected


def residual_static(
    model: KinematicModel,
    beta: JointState,
    intrinsics_s: CameraIntrinsics,
    p_d: np.ndarray,
    z_s: np.ndarray,
) -> np.ndarray:
    """e = z_s - psi_s(T_ds(pi, beta)^-1 p_d), pixels."""
    chain = invert(full_chain(model, beta))
    point = apply(chain, np.asarray(p_d, dtype=float).reshape(1, 3))
    projected = project_points(intrinsics_s, point)[0]
    return np.asarray(z_s, dtype=float).reshape(2) - projected


@dataclass
class SetEvaluation:
    """Residuals of one measurement set, optionally with Jacobian blocks."""

    residuals: np.ndarray
    jac_kinematic: Optional[np.ndarray] = None
    jac_joints: Optional[np.ndarray] = None


def evaluate_set(
    kin: np.ndarray,
    num_links: int,
    beta: np.ndarray,
    intrinsics_s: CameraIntrinsics,
    intrinsics_d: CameraIntrinsics,
    mset: MeasurementSet,
    with_jacobian: bool = True,
) -> SetEvaluation:
    """Stacked residuals (4N,) and Jacobians (4N, 12+3L) and (4N, L)."""
    if with_jacobian:
        m, d_kin, d_beta = chain_with_derivatives(kin, num_links, beta)
    else:
        m = chain_matrix(kin, num_links, beta)
    rotation, translation = m[:3, :3], m[:3, 3]

    in_dynamic = mset.p_s @ rotation.T + translation
    offset = mset.p_d - translation
    in_static = offset @ rotation

    e_d = mset.q_d - project_points(intrinsics_d, in_dynamic)
    e_s = mset.q_s - project_points(intrinsics_s, in_static)
    residuals = np.hstack([e_d, e_s]).reshape(-1)
    if not with_jacobian:
        return SetEvaluation(residuals)

    proj_d = projection_jacobian(intrinsics_d, in_dynamic)
    proj_s = projection_jacobian(intrinsics_s, in_static)

    def blocks(partials: np.ndarray) -> np.ndarray:
        d_rot, d_trans = partials[:, :3, :3], partials[:, :3, 3]
        # dynamic: d(R p_s + t)
        dy_d = np.einsum("kij,nj->nki", d_rot, mset.p_s) + d_trans[None, :, :]
        # static: d(R^T (p_d - t)) = dR^T (p_d - t) - R^T dt
        dy_s = np.einsum("kji,nj->nki", d_rot, offset) - (d_trans @ rotation)[None]
        de_d = -np.einsum("nij,nkj->nik", proj_d, dy_d)
        de_s = -np.einsum("nij,nkj->nik", proj_s, dy_s)
        stacked = np.concatenate([de_d, de_s], axis=1)
        return stacked.reshape(-1, partials.shape[0])

    return SetEvaluation(residuals, blocks(d_kin), blocks(d_beta))


@dataclass(frozen=True)
class ReprojectionStats:
    """Reprojection error statistics over all sets, points and both cameras.

    The per-point error is the Euclidean norm of a 2-vector residual; mean and
    std (population) are taken over every such norm. `rms_px` is the RMS of
    the individual pixel components.
    Under i.i.d. Gaussian pixel noise of sigma per coordinate, mean_px tends to
    sigma * sqrt(pi / 2) and rms_px to sigma.
    """

    mean_px: float
    std_px: float
    n_points: int
    rms_px: float
    mean_static_px: float
    mean_dynamic_px: float
    per_set_mean_px: Tuple[float, ...] = ()

    @classmethod
    def from_residuals(
        cls, residuals: np.ndarray, set_sizes: Sequence[int]
    ) -> "ReprojectionStats":
        """Statistics of a stacked residual vector with per-set point counts."""
        per_point = np.asarray(residuals, dtype=float).reshape(-1, RESIDUALS_PER_POINT)
        if per_point.shape[0] != int(sum(set_sizes)):
            raise ShapeMismatchError(
                f"{per_point.shape[0]} residual points for set sizes summing "
                f"to {int(sum(set_sizes))}"
            )
        dynamic = np.linalg.norm(per_point[:, 0:2], axis=1)
        static = np.linalg.norm(per_point[:, 2:4], axis=1)
        norms = np.column_stack([dynamic, static])
        if norms.size == 0:
            return cls(0.0, 0.0, 0, 0.0, 0.0, 0.0, tuple(0.0 for _ in set_sizes))

        per_set = []
        start = 0
        for size in set_sizes:
            block = norms[start : start + size]
            per_set.append(float(block.mean()) if block.size else 0.0)
            start += size
        return cls(
            mean_px=float(norms.mean()),
            std_px=float(norms.std()),
            n_points=int(norms.size),
            rms_px=float(np.sqrt(np.mean(per_point**2))),
            mean_static_px=float(static.mean()),
            mean_dynamic_px=float(dynamic.mean()),
            per_set_mean_px=tuple(per_set),
        )
