"""Denavit-Hartenberg chain of the actuated mechanism and the camera-to-camera map.

The static-to-dynamic camera transform for joint state beta is

    T_ds(pi, beta) = T(tau_d) @ A_1(theta_1) @ ... @ A_L(theta_L) @ T(tau_s)

with classic DH factors A_l = RotZ(theta_l) TransZ(d_l) TransX(a_l) RotX(alpha_l).
Packed kinematic vectors are ordered [tau_d (6), (d, a, alpha) per link, tau_s (6)].
"""

from dataclasses import dataclass, field
from typing import List, Sequence, Tuple

import numpy as np

from ..core.errors import DimensionMismatchError, LengthMismatchError
from .geometry import (
    Pose6,
    RigidTransform,
    pose_matrix,
    pose_matrix_derivatives,
    wrap_angle,
)

POSE_SIZE = 6
LINK_SIZE = 3


@dataclass(frozen=True)
class DhLink:
    """Constants of one link: offset d (m), length a (m), twist alpha (rad)."""

    d: float = 0.0
    a: float = 0.0
    alpha: float = 0.0

    def canonical(self) -> "DhLink":
        return DhLink(self.d, self.a, wrap_angle(self.alpha))


@dataclass(frozen=True)
class JointState:
    """Joint angles of the L revolute joints, radians."""

    angles: Tuple[float, ...] = ()

    def __post_init__(self) -> None:
        object.__setattr__(self, "angles", tuple(float(a) for a in self.angles))

    def __len__(self) -> int:
        return len(self.angles)

    def as_array(self) -> np.ndarray:
        return np.array(self.angles, dtype=float)

    def canonical(self) -> "JointState":
        return JointState(tuple(wrap_angle(a) for a in self.angles))


@dataclass(frozen=True)
class KinematicModel:
    """Kinematic parameters pi: tau_s, the DH links and tau_d."""

    tau_s: Pose6 = field(default_factory=Pose6)
    links: Tuple[DhLink, ...] = (DhLink(),)
    tau_d: Pose6 = field(default_factory=Pose6)

    def __post_init__(self) -> None:
        links = tuple(self.links)
        if len(links) < 1:
            raise ValueError("A kinematic model needs at least one link")
        object.__setattr__(self, "links", links)

    @property
    def num_links(self) -> int:
        return len(self.links)

    @property
    def parameter_count(self) -> int:
        return kinematic_parameter_count(self.num_links)

    def canonical(self) -> "KinematicModel":
        return KinematicModel(
            tau_s=self.tau_s.canonical(),
            links=tuple(link.canonical() for link in self.links),
            tau_d=self.tau_d.canonical(),
        )


def kinematic_parameter_count(num_links: int) -> int:
    """12 + 3L."""
    return 2 * POSE_SIZE + LINK_SIZE * num_links


def dh_matrix(theta: float, d: float, a: float, alpha: float) -> np.ndarray:
    """4x4 matrix of RotZ(theta) TransZ(d) TransX(a) RotX(alpha)."""
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    return np.array(
        [
            [ct, -st * ca, st * sa, a * ct],
            [st, ct * ca, -ct * sa, a * st],
            [0.0, sa, ca, d],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def dh_matrix_derivatives(
    theta: float, d: float, a: float, alpha: float
) -> Tuple[np.ndarray, np.ndarray]:
    """Partials of dh_matrix: (d/dtheta, stacked [d/dd, d/da, d/dalpha])."""
    ct, st = np.cos(theta), np.sin(theta)
    ca, sa = np.cos(alpha), np.sin(alpha)
    d_theta = np.array(
        [
            [-st, -ct * ca, ct * sa, -a * st],
            [ct, -st * ca, st * sa, a * ct],
            [0.0, 0.0, 0.0, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]
    )
    d_d = np.zeros((4, 4))
    d_d[2, 3] = 1.0
    d_a = np.zeros((4, 4))
    d_a[0, 3] = ct
    d_a[1, 3] = st
    d_alpha = np.array(
        [
            [0.0, st * sa, st * ca, 0.0],
            [0.0, -ct * sa, -ct * ca, 0.0],
            [0.0, ca, -sa, 0.0],
            [0.0, 0.0, 0.0, 0.0],
        ]
    )
    return d_theta, np.stack([d_d, d_a, d_alpha])


def dh_transform(theta: float, link: DhLink) -> RigidTransform:
    return RigidTransform.from_matrix(dh_matrix(theta, link.d, link.a, link.alpha))


def check_joints(num_links: int, beta: Sequence[float]) -> np.ndarray:
    values = np.asarray(
        beta.angles if isinstance(beta, JointState) else beta, dtype=float
    ).reshape(-1)
    if values.shape[0] != num_links:
        raise DimensionMismatchError(
            f"Expected {num_links} joint angles, got {values.shape[0]}"
        )
    return values


def forward_kinematics(links: Sequence[DhLink], beta: JointState) -> RigidTransform:
    """Product of the DH link transforms, link 1 leftmost."""
    thetas = check_joints(len(links), beta)
    out = np.eye(4)
    for theta, link in zip(thetas, links):
        out = out @ dh_matrix(theta, link.d, link.a, link.alpha)
    return RigidTransform.from_matrix(out)


def full_chain(model: KinematicModel, beta: JointState) -> RigidTransform:
    """Static-to-dynamic camera transform T(tau_d) @ FK(beta) @ T(tau_s)."""
    return RigidTransform.from_matrix(
        chain_matrix(pack_parameters(model), model.num_links, beta)
    )


def pack_parameters(model: KinematicModel) -> np.ndarray:
    """Flatten a model into [tau_d, (d, a, alpha) per link, tau_s]."""
    parts = [model.tau_d.as_array()]
    parts.extend(np.array([l.d, l.a, l.alpha], dtype=float) for l in model.links)
    parts.append(model.tau_s.as_array())
    return np.concatenate(parts)


def unpack_parameters(vector: Sequence[float], num_links: int) -> KinematicModel:
    """Inverse of pack_parameters.

    Raises:
        LengthMismatchError: vector length differs from 12 + 3L.
    """
    vector = np.asarray(vector, dtype=float).reshape(-1)
    expected = kinematic_parameter_count(num_links)
    if vector.shape[0] != expected:
        raise LengthMismatchError(
            f"Expected {expected} kinematic parameters for L={num_links}, "
            f"got {vector.shape[0]}"
        )
    tau_d = Pose6.from_array(vector[:POSE_SIZE])
    links = []
    for l in range(num_links):
        start = POSE_SIZE + LINK_SIZE * l
        d, a, alpha = vector[start : start + LINK_SIZE]
        links.append(DhLink(float(d), float(a), float(alpha)))
    tau_s = Pose6.from_array(vector[POSE_SIZE + LINK_SIZE * num_links :])
    return KinematicModel(tau_s=tau_s, links=tuple(links), tau_d=tau_d)


def _chain_factors(
    kin: np.ndarray, num_links: int, thetas: np.ndarray
) -> List[np.ndarray]:
    factors = [pose_matrix(kin[:POSE_SIZE])]
    for l in range(num_links):
        d, a, alpha = kin[POSE_SIZE + LINK_SIZE * l : POSE_SIZE + LINK_SIZE * (l + 1)]
        factors.append(dh_matrix(thetas[l], d, a, alpha))
    factors.append(pose_matrix(kin[POSE_SIZE + LINK_SIZE * num_links :]))
    return factors


def chain_matrix(
    kin: Sequence[float], num_links: int, beta: Sequence[float]
) -> np.ndarray:
    """4x4 static-to-dynamic matrix from a packed kinematic vector."""
    kin = np.asarray(kin, dtype=float)
    thetas = check_joints(num_links, beta)
    out = np.eye(4)
    for factor in _chain_factors(kin, num_links, thetas):
        out = out @ factor
    return out


def chain_with_derivatives(
    kin: Sequence[float], num_links: int, beta: Sequence[float]
) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Chain matrix plus its partials.

    Returns:
        (M, dM_kin, dM_beta) with M of shape (4, 4), dM_kin of shape
        (12 + 3L, 4, 4) in packed order and dM_beta of shape (L, 4, 4).
    """
    kin = np.asarray(kin, dtype=float)
    thetas = check_joints(num_links, beta)
    factors = _chain_factors(kin, num_links, thetas)
    count = len(factors)

    prefix = [np.eye(4)]
    for factor in factors:
        prefix.append(prefix[-1] @ factor)
    suffix = [np.eye(4)] * (count + 1)
    for i in range(count - 1, -1, -1):
        suffix[i] = factors[i] @ suffix[i + 1]

    d_kin = np.zeros((kinematic_parameter_count(num_links), 4, 4))
    d_beta = np.zeros((num_links, 4, 4))

    for k, dpose in enumerate(pose_matrix_derivatives(kin[:POSE_SIZE])):
        d_kin[k] = dpose @ suffix[1]

    for l in range(num_links):
        start = POSE_SIZE + LINK_SIZE * l
        d, a, alpha = kin[start : start + LINK_SIZE]
        d_theta, d_link = dh_matrix_derivatives(thetas[l], d, a, alpha)
        left, right = prefix[l + 1], suffix[l + 2]
        d_beta[l] = left @ d_theta @ right
        for k in range(LINK_SIZE):
            d_kin[start + k] = left @ d_link[k] @ right

    tail = POSE_SIZE + LINK_SIZE * num_links
    last = prefix[count - 1]
    for k, dpose in enumerate(pose_matrix_derivatives(kin[tail:])):
        d_kin[tail + k] = last @ dpose

    return prefix[count], d_kin, d_beta


def translation_role_mask(num_links: int) -> np.ndarray:
    """Packed-order mask: True for meters (pose t, DH d and a), False for radians."""
    pose = np.array([False, False, False, True, True, True])
    link = np.array([True, True, False])
    return np.concatenate([pose, np.tile(link, num_links), pose])
