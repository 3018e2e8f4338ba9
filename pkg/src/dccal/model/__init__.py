"""Rigid transforms, camera projection, DH kinematics and target measurements."""

from .camera import CameraIntrinsics
from .geometry import Pose6, RigidTransform
from .kinematics import DhLink, JointState, KinematicModel
from .measurement import Dataset, FiducialTarget, MeasurementSet

__all__ = [
    "CameraIntrinsics",
    "Pose6",
    "RigidTransform",
    "DhLink",
    "JointState",
    "KinematicModel",
    "Dataset",
    "FiducialTarget",
    "MeasurementSet",
]
