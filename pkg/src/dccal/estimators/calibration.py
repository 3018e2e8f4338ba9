"""Encoder-based, encoderless and validation calibration of the camera chain.

All three minimize the total squared reprojection error between the two
cameras over every measurement set; they differ only in which parameters
are free:

- encoderless: kinematic vector and every joint state (12 + (3+K)L values)
- with encoders: kinematic vector only, joint states fixed to the encoders
- validation: joint states only, kinematic vector frozen
"""

from dataclasses import dataclass
from typing import Any, List, Optional, Sequence, Tuple

import numpy as np
import structlog

from ..core.config import SolveOptions
from ..core.errors import MissingEncoderAnglesError, ShapeMismatchError
from ..core.registry import EstimatorRegistry
from ..model.geometry import (
    Pose6,
    RigidTransform,
    pose_matrix,
    transform_to_pose,
    wrap_angle,
    wrap_angles,
)
from ..model.kinematics import (
    DhLink,
    JointState,
    KinematicModel,
    chain_matrix,
    dh_matrix,
    kinematic_parameter_count,
    pack_parameters,
)
from ..model.measurement import Dataset
from .base import (
    MODE_ENCODERLESS,
    MODE_VALIDATION,
    MODE_WITH_ENCODERS,
    BaseCalibrator,
    CalibrationEstimate,
    CalibrationResult,
    optimization_vector_length,
    packed_initial,
)
from .residuals import SetEvaluation, evaluate_set

logger = structlog.get_logger(__name__)

__all__ = [
    "CalibrationEstimate",
    "CalibrationResult",
    "EncoderCalibrator",
    "EncoderlessCalibrator",
    "TruthErrorReport",
    "ValidationCalibrator",
    "align_gauge",
    "calibrate_encoderless",
    "calibrate_with_encoders",
    "create_registry",
    "evaluate_against_truth",
    "optimization_vector_length",
    "stacked_residuals",
    "total_cost",
    "validate",
]


class EncoderlessCalibrator(BaseCalibrator):
    """Joint estimate of the kinematic parameters and all joint states."""

    mode = MODE_ENCODERLESS

    def initial_vector(
        self, init_model: KinematicModel, init_angles: Optional[Sequence[Any]]
    ) -> np.ndarray:
        return packed_initial(init_model, self.angle_array(init_angles))

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        n_kin = kinematic_parameter_count(self.num_links)
        return x[:n_kin], x[n_kin:].reshape(self.dataset.num_sets, self.num_links)

    def assemble_jacobian(self, evaluations: List[SetEvaluation]) -> np.ndarray:
        return np.hstack(
            [self.kinematic_columns(evaluations), self.joint_columns(evaluations)]
        )


class EncoderCalibrator(BaseCalibrator):
    """Kinematic parameters only, with joint states read from the encoders."""

    mode = MODE_WITH_ENCODERS
    requires_excitation = False

    def check_dataset(self) -> None:
        missing = [
            index
            for index, mset in enumerate(self.dataset.sets)
            if mset.known_angles is None
        ]
        if missing:
            raise MissingEncoderAnglesError(
                f"Sets without known joint angles: {missing[:10]}"
                + (" ..." if len(missing) > 10 else "")
            )
        super().check_dataset()

    def initial_vector(
        self, init_model: KinematicModel, init_angles: Optional[Sequence[Any]]
    ) -> np.ndarray:
        if init_angles is not None:
            self.logger.debug("Ignoring initial angles; encoder angles are fixed")
        self._encoder_angles = self.angle_array(
            [mset.known_angles for mset in self.dataset.sets]
        )
        return pack_parameters(init_model)

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return x, self._encoder_angles

    def assemble_jacobian(self, evaluations: List[SetEvaluation]) -> np.ndarray:
        return self.kinematic_columns(evaluations)


class ValidationCalibrator(BaseCalibrator):
    """Joint states only, with the kinematic parameters frozen."""

    mode = MODE_VALIDATION

    def initial_vector(
        self, init_model: KinematicModel, init_angles: Optional[Sequence[Any]]
    ) -> np.ndarray:
        self._frozen = pack_parameters(init_model)
        return self.angle_array(init_angles).reshape(-1)

    def split(self, x: np.ndarray) -> Tuple[np.ndarray, np.ndarray]:
        return self._frozen, x.reshape(self.dataset.num_sets, self.num_links)

    def assemble_jacobian(self, evaluations: List[SetEvaluation]) -> np.ndarray:
        return self.joint_columns(evaluations)


def create_registry() -> EstimatorRegistry:
    """Registry holding the built-in calibration modes."""
    registry = EstimatorRegistry()
    registry.register_estimator_class("encoderless", EncoderlessCalibrator)
    registry.register_estimator_class("encoders", EncoderCalibrator)
    registry.register_estimator_class("validate", ValidationCalibrator)
    return registry


def calibrate_encoderless(
    dataset: Dataset,
    init_model: KinematicModel,
    init_angles: Sequence[JointState],
    opts: Optional[SolveOptions] = None,
    **kwargs: Any,
) -> CalibrationResult:
    """Jointly estimate kinematic parameters and joint angles.

    Keyword arguments (workers, min_sets, force, strict) go to the estimator.
    """
    return EncoderlessCalibrator(dataset, opts, **kwargs).calibrate(
        init_model, init_angles
    )


def calibrate_with_encoders(
    dataset: Dataset,
    init_model: KinematicModel,
    opts: Optional[SolveOptions] = None,
    **kwargs: Any,
) -> CalibrationResult:
    """Estimate kinematic parameters with joint angles fixed to the encoders."""
    return EncoderCalibrator(dataset, opts, **kwargs).calibrate(init_model)


def validate(
    dataset: Dataset,
    frozen_model: KinematicModel,
    init_angles: Sequence[JointState],
    opts: Optional[SolveOptions] = None,
    **kwargs: Any,
) -> CalibrationResult:
    """Estimate only the joint angles against a frozen calibration."""
    return ValidationCalibrator(dataset, opts, **kwargs).calibrate(
        frozen_model, init_angles
    )


def stacked_residuals(
    dataset: Dataset, model: KinematicModel, angles: Sequence[JointState]
) -> np.ndarray:
    """The residual vector the calibrators optimize, in solver order."""
    if len(angles) != dataset.num_sets:
        raise ShapeMismatchError(
            f"Expected {dataset.num_sets} joint states, got {len(angles)}"
        )
    kin = pack_parameters(model)
    blocks = [
        evaluate_set(
            kin,
            model.num_links,
            state.as_array(),
            dataset.intrinsics_s,
            dataset.intrinsics_d,
            mset,
            with_jacobian=False,
        ).residuals
        for state, mset in zip(angles, dataset.sets)
    ]
    return np.concatenate(blocks)


def total_cost(dataset: Dataset, estimate: CalibrationEstimate) -> float:
    """Sum over sets and common points of |e_d|^2 + |e_s|^2, pixels^2."""
    r = stacked_residuals(dataset, estimate.model, estimate.joint_trajectory)
    return float(r @ r)


@dataclass(frozen=True)
class TruthErrorReport:
    """Estimation errors against ground truth.

    Joint errors are |wrap(estimated - true)| per joint over all sets.
    Parameter errors are pooled by role: translation (t of both poses, DH d
    and a) in meters and rotation (r of both poses, DH alpha) in radians.
    With gauge alignment, parameters pinned to the truth by the alignment are
    left out of the pools. The chain errors compare the camera-to-camera
    transform per set and do not depend on the gauge.
    """

    joint_mean_rad: Tuple[float, ...]
    joint_std_rad: Tuple[float, ...]
    translation_mean_m: float
    translation_std_m: float
    rotation_mean_rad: float
    rotation_std_rad: float
    chain_rotation_max_rad: float
    chain_translation_max_m: float
    gauge_aligned: bool = True


def _angle_rows(angles: Sequence[Any]) -> np.ndarray:
    rows = [a.angles if isinstance(a, JointState) else tuple(a) for a in angles]
    return np.array(rows, dtype=float)


def align_gauge(
    model: KinematicModel,
    angles: np.ndarray,
    reference_model: KinematicModel,
    reference_angles: np.ndarray,
) -> Tuple[KinematicModel, np.ndarray]:
    """Re-express an estimate in the gauge of a reference solution.

    The last link's constants and the mean offset of the last joint are
    absorbed into tau_s; the first link's offset d and the mean offset of the
    first joint into tau_d. Every chain transform is preserved exactly.
    """
    links: List[DhLink] = list(model.links)
    reference_links = reference_model.links
    angles = np.array(angles, dtype=float, copy=True)
    last = len(links) - 1

    offset = float(np.mean(wrap_angles(angles[:, last] - reference_angles[:, last])))
    estimated = links[last]
    target = reference_links[last]
    g_est = dh_matrix(0.0, estimated.d, estimated.a, estimated.alpha)
    g_ref = dh_matrix(0.0, target.d, target.a, target.alpha)
    tau_s = (
        np.linalg.inv(g_ref)
        @ dh_matrix(offset, 0.0, 0.0, 0.0)
        @ g_est
        @ pose_matrix(model.tau_s.as_array())
    )
    angles[:, last] -= offset
    links[last] = target

    offset = float(np.mean(wrap_angles(angles[:, 0] - reference_angles[:, 0])))
    shift = links[0].d - reference_links[0].d
    # RotZ and TransZ commute, so both slide through the first joint
    tau_d = pose_matrix(model.tau_d.as_array()) @ dh_matrix(offset, shift, 0.0, 0.0)
    angles[:, 0] -= offset
    links[0] = DhLink(reference_links[0].d, links[0].a, links[0].alpha)

    aligned = KinematicModel(
        tau_s=transform_to_pose(RigidTransform.from_matrix(tau_s)),
        links=tuple(links),
        tau_d=transform_to_pose(RigidTransform.from_matrix(tau_d)),
    )
    return aligned, angles


def _pose_errors(estimate: Pose6, truth: Pose6) -> Tuple[np.ndarray, np.ndarray]:
    diff = estimate.as_array() - truth.as_array()
    return np.abs(diff[3:]), np.abs(wrap_angles(diff[:3]))


def _chain_errors(
    model: KinematicModel,
    angles: np.ndarray,
    truth_model: KinematicModel,
    truth_angles: np.ndarray,
) -> Tuple[float, float]:
    kin, kin_true = pack_parameters(model), pack_parameters(truth_model)
    worst_rotation, worst_translation = 0.0, 0.0
    for beta, beta_true in zip(angles, truth_angles):
        m = chain_matrix(kin, model.num_links, beta)
        m_true = chain_matrix(kin_true, truth_model.num_links, beta_true)
        relative = m[:3, :3].T @ m_true[:3, :3]
        cos_angle = np.clip((np.trace(relative) - 1.0) / 2.0, -1.0, 1.0)
        worst_rotation = max(worst_rotation, float(np.arccos(cos_angle)))
        worst_translation = max(
            worst_translation, float(np.linalg.norm(m[:3, 3] - m_true[:3, 3]))
        )
    return worst_rotation, worst_translation


def evaluate_against_truth(
    result: CalibrationResult,
    truth_model: KinematicModel,
    truth_angles: Sequence[JointState],
    align: bool = True,
) -> TruthErrorReport:
    """Joint-angle and parameter error statistics against ground truth.

    Raises:
        ShapeMismatchError: link or set counts differ from the estimate.
    """
    estimate = result.estimate
    model = estimate.model
    if truth_model.num_links != model.num_links:
        raise ShapeMismatchError(
            f"Truth has {truth_model.num_links} links, estimate {model.num_links}"
        )
    truth = _angle_rows(truth_angles)
    angles = estimate.angle_matrix()
    if truth.shape != angles.shape:
        raise ShapeMismatchError(
            f"Truth angles have shape {truth.shape}, estimate {angles.shape}"
        )

    chain_rotation, chain_translation = _chain_errors(
        model, angles, truth_model, truth
    )
    if align:
        model, angles = align_gauge(model, angles, truth_model, truth)

    joint_errors = np.abs(wrap_angles(angles - truth))
    translation, rotation = [], []
    pose_pairs = ((model.tau_s, truth_model.tau_s), (model.tau_d, truth_model.tau_d))
    for pose, pose_true in pose_pairs:
        t_err, r_err = _pose_errors(pose, pose_true)
        translation.extend(t_err)
        rotation.extend(r_err)

    last = model.num_links - 1
    for index, (link, link_true) in enumerate(zip(model.links, truth_model.links)):
        if align and index == last:
            continue
        if not (align and index == 0):
            translation.append(abs(link.d - link_true.d))
        translation.append(abs(link.a - link_true.a))
        rotation.append(abs(wrap_angle(link.alpha - link_true.alpha)))

    translation_arr = np.array(translation, dtype=float)
    rotation_arr = np.array(rotation, dtype=float)
    report = TruthErrorReport(
        joint_mean_rad=tuple(float(v) for v in joint_errors.mean(axis=0)),
        joint_std_rad=tuple(float(v) for v in joint_errors.std(axis=0)),
        translation_mean_m=float(translation_arr.mean()),
        translation_std_m=float(translation_arr.std()),
        rotation_mean_rad=float(rotation_arr.mean()),
        rotation_std_rad=float(rotation_arr.std()),
        chain_rotation_max_rad=chain_rotation,
        chain_translation_max_m=chain_translation,
        gauge_aligned=align,
    )
    logger.debug(
        "Compared estimate against truth",
        mode=estimate.mode,
        joint_mean_rad=report.joint_mean_rad,
        translation_mean_m=report.translation_mean_m,
        rotation_mean_rad=report.rotation_mean_rad,
    )
    return report
