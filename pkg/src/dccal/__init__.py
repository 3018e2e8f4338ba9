"""
dccal - calibration and joint angle tracking for dynamic camera clusters

A dynamic camera cluster is a static camera plus a camera carried by an
actuated mechanism (a gimbal, a pan-tilt head). dccal estimates the chain
that links the two cameras together with the unknown joint angles of every
snapshot, without encoders, and then tracks joint angles online from
landmark reprojections.

Simple Usage:
    import dccal

    bundle = dccal.synthesize_dataset(dccal.SimulationConfig.create_default())
    result = dccal.calibrate_encoderless(
        bundle.dataset, bundle.perturbed_init_model, bundle.perturbed_init_angles
    )
    print(result.stats.mean_px)
"""

__version__ = "0.1.0"
__author__ = "dccal contributors"

from .core.config import RunConfig, SolveOptions
from .core.errors import DccError
from .estimators.calibration import (
    calibrate_encoderless,
    calibrate_with_encoders,
    evaluate_against_truth,
    validate,
)
from .estimators.tracker import RigExtrinsics, track_sequence
from .model.kinematics import DhLink, JointState, KinematicModel
from .simulation.simulator import SimulationConfig, run_sim_study, synthesize_dataset

__all__ = [
    "RunConfig",
    "SolveOptions",
    "DccError",
    "DhLink",
    "JointState",
    "KinematicModel",
    "calibrate_encoderless",
    "calibrate_with_encoders",
    "validate",
    "evaluate_against_truth",
    "RigExtrinsics",
    "track_sequence",
    "SimulationConfig",
    "synthesize_dataset",
    "run_sim_study",
]
