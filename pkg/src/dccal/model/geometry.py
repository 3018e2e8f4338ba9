"""Rigid-body transforms and the 3-2-1 Euler pose parameterization.

Rotations use R = Rz(r_z) @ Ry(r_y) @ Rx(r_x). Angles are canonicalized to
[-pi, pi) at the boundaries of the package; optimizer iterates are left
unwrapped.
"""

from dataclasses import dataclass, field
from typing import List, Sequence

import numpy as np

from ..core.errors import SingularityError

PITCH_SINGULARITY_TOL = 1e-6


def wrap_angle(angle: float) -> float:
    """Map an angle to the canonical range [-pi, pi)."""
    angle = float(angle)
    if -np.pi <= angle < np.pi:
        return angle
    wrapped = (angle + np.pi) % (2.0 * np.pi) - np.pi
    # floating point modulo can land exactly on +pi
    if wrapped >= np.pi:
        wrapped -= 2.0 * np.pi
    return wrapped


def wrap_angles(angles: np.ndarray) -> np.ndarray:
    """Vectorized wrap_angle."""
    angles = np.asarray(angles, dtype=float)
    wrapped = np.mod(angles + np.pi, 2.0 * np.pi) - np.pi
    wrapped = np.where(wrapped >= np.pi, wrapped - 2.0 * np.pi, wrapped)
    inside = (angles >= -np.pi) & (angles < np.pi)
    return np.where(inside, angles, wrapped)


def rot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[1.0, 0.0, 0.0], [0.0, c, -s], [0.0, s, c]])


def rot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, 0.0, s], [0.0, 1.0, 0.0], [-s, 0.0, c]])


def rot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]])


def _drot_x(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[0.0, 0.0, 0.0], [0.0, -s, -c], [0.0, c, -s]])


def _drot_y(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[-s, 0.0, c], [0.0, 0.0, 0.0], [-c, 0.0, -s]])


def _drot_z(angle: float) -> np.ndarray:
    c, s = np.cos(angle), np.sin(angle)
    return np.array([[-s, -c, 0.0], [c, -s, 0.0], [0.0, 0.0, 0.0]])


@dataclass(frozen=True)
class Pose6:
    """Six-parameter rigid transform: 3-2-1 Euler angles (rad) + translation (m)."""

    r_x: float = 0.0
    r_y: float = 0.0
    r_z: float = 0.0
    t_x: float = 0.0
    t_y: float = 0.0
    t_z: float = 0.0

    @classmethod
    def from_array(cls, values: Sequence[float]) -> "Pose6":
        """Build a pose from [r_x, r_y, r_z, t_x, t_y, t_z]."""
        if len(values) != 6:
            raise ValueError(f"Pose6 needs 6 values, got {len(values)}")
        return cls(*(float(v) for v in values))

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.r_x, self.r_y, self.r_z, self.t_x, self.t_y, self.t_z], dtype=float
        )

    @property
    def angles(self) -> np.ndarray:
        return np.array([self.r_x, self.r_y, self.r_z], dtype=float)

    @property
    def translation(self) -> np.ndarray:
        return np.array([self.t_x, self.t_y, self.t_z], dtype=float)

    def canonical(self) -> "Pose6":
        """Return the same pose with every angle wrapped into [-pi, pi)."""
        return Pose6(
            wrap_angle(self.r_x),
            wrap_angle(self.r_y),
            wrap_angle(self.r_z),
            self.t_x,
            self.t_y,
            self.t_z,
        )


@dataclass(frozen=True, eq=False)
class RigidTransform:
    """Element of SE(3) stored as a rotation matrix and a translation."""

    rotation: np.ndarray = field(default_factory=lambda: np.eye(3))
    translation: np.ndarray = field(default_factory=lambda: np.zeros(3))

    def __post_init__(self) -> None:
        rotation = np.array(self.rotation, dtype=float).reshape(3, 3)
        translation = np.array(self.translation, dtype=float).reshape(3)
        rotation.flags.writeable = False
        translation.flags.writeable = False
        object.__setattr__(self, "rotation", rotation)
        object.__setattr__(self, "translation", translation)

    @classmethod
    def identity(cls) -> "RigidTransform":
        return cls(np.eye(3), np.zeros(3))

    @classmethod
    def from_matrix(cls, matrix: np.ndarray) -> "RigidTransform":
        """Build a transform from a 4x4 homogeneous matrix."""
        matrix = np.asarray(matrix, dtype=float)
        return cls(matrix[:3, :3], matrix[:3, 3])

    @property
    def matrix(self) -> np.ndarray:
        """4x4 homogeneous matrix."""
        out = np.eye(4)
        out[:3, :3] = self.rotation
        out[:3, 3] = self.translation
        return out

    def __matmul__(self, other: "RigidTransform") -> "RigidTransform":
        return compose(self, other)


def pose_to_transform(pose: Pose6) -> RigidTransform:
    """Rotation Rz(r_z) @ Ry(r_y) @ Rx(r_x) with translation (t_x, t_y, t_z)."""
    rotation = rot_z(pose.r_z) @ rot_y(pose.r_y) @ rot_x(pose.r_x)
    return RigidTransform(rotation, pose.translation)


def compose(a: RigidTransform, b: RigidTransform) -> RigidTransform:
    """Transform mapping p to a(b(p))."""
    return RigidTransform(
        a.rotation @ b.rotation, a.rotation @ b.translation + a.translation
    )


def invert(t: RigidTransform) -> RigidTransform:
    rotation_t = t.rotation.T
    return RigidTransform(rotation_t, -rotation_t @ t.translation)


def apply(t: RigidTransform, p: np.ndarray) -> np.ndarray:
    """Apply a transform to a 3-vector or to an (N, 3) array of points."""
    p = np.asarray(p, dtype=float)
    return p @ t.rotation.T + t.translation


def transform_to_pose(t: RigidTransform) -> Pose6:
    """Decompose a transform into canonical 3-2-1 Euler angles + translation.

    Raises:
        SingularityError: pitch within PITCH_SINGULARITY_TOL of +/- pi/2.
    """
    r = t.rotation
    cos_pitch = float(np.hypot(r[0, 0], r[1, 0]))
    pitch = float(np.arctan2(-r[2, 0], cos_pitch))
    if abs(abs(pitch) - np.pi / 2.0) < PITCH_SINGULARITY_TOL:
        raise SingularityError(
            f"Pitch {pitch:.9f} rad is within {PITCH_SINGULARITY_TOL} of +/-pi/2"
        )
    roll = float(np.arctan2(r[2, 1], r[2, 2]))
    yaw = float(np.arctan2(r[1, 0], r[0, 0]))
    tx, ty, tz = (float(v) for v in t.translation)
    return Pose6(roll, pitch, yaw, tx, ty, tz).canonical()


def pose_matrix_derivatives(pose_values: Sequence[float]) -> List[np.ndarray]:
    """Partial derivatives of the 4x4 pose matrix w.r.t. each of the 6 parameters.

    Order follows Pose6: r_x, r_y, r_z, t_x, t_y, t_z.
    """
    r_x, r_y, r_z = (float(v) for v in pose_values[:3])
    rx, ry, rz = rot_x(r_x), rot_y(r_y), rot_z(r_z)
    rotation_partials = [
        rz @ ry @ _drot_x(r_x),
        rz @ _drot_y(r_y) @ rx,
        _drot_z(r_z) @ ry @ rx,
    ]
    out = []
    for partial in rotation_partials:
        d = np.zeros((4, 4))
        d[:3, :3] = partial
        out.append(d)
    for axis in range(3):
        d = np.zeros((4, 4))
        d[axis, 3] = 1.0
        out.append(d)
    return out


def pose_matrix(pose_values: Sequence[float]) -> np.ndarray:
    """4x4 matrix of a pose given as a raw (possibly unwrapped) 6-vector."""
    return pose_to_transform(Pose6.from_array(pose_values)).matrix
