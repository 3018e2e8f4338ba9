"""Test cases for frame-by-frame tracking."""

import numpy as np
import pytest
from numpy.testing import assert_allclose

from dccal.core.errors import (
    ConfigError,
    DimensionMismatchError,
    InsufficientObservationsError,
    SingularityError,
)
from dccal.core.solver import numeric_jacobian
from dccal.estimators.tracker import (
    CameraRole,
    FrameProblem,
    RigExtrinsics,
    TrackerEstimate,
    TrackerFrame,
    check_frame,
    dynamic_extrinsic,
    estimate_frame,
    joint_jacobian,
    track_sequence,
    tracker_residual,
)
from dccal.model.geometry import Pose6, apply, compose, invert, pose_to_transform
from dccal.model.kinematics import JointState, full_chain
from dccal.simulation.sequences import SequenceConfig, simulate_sequence
from dccal.simulation.simulator import InitNoise


@pytest.fixture(scope="module")
def clean_sequence():
    """20 noiseless frames with a slightly perturbed prior."""
    config = SequenceConfig(
        num_frames=20,
        pixel_noise_sigma=0.0,
        prior_noise=InitNoise(sigma_translation_m=0.01, sigma_rotation_rad=0.01),
    )
    return simulate_sequence(config)


def perturbed(estimate: TrackerEstimate, rng) -> TrackerEstimate:
    return TrackerEstimate.from_vector(
        estimate.as_vector() + rng.normal(0.0, 0.02, estimate.as_vector().shape)
    )


class TestResiduals:
    """Test tracker residuals and their Jacobians."""

    def test_dynamic_extrinsic(self, clean_sequence):
        rig = clean_sequence.rig
        beta = JointState((0.25, -0.4))
        expected = compose(full_chain(rig.model, beta), rig.T_s_I)
        assert_allclose(
            dynamic_extrinsic(rig, beta).matrix, expected.matrix, atol=1e-12
        )

    def test_zero_at_truth(self, clean_sequence):
        frame = clean_sequence.frames[3]
        truth = clean_sequence.truth[3]
        for role, observations in (
            (CameraRole.STATIC, frame.obs_static),
            (CameraRole.DYNAMIC, frame.obs_dynamic),
        ):
            landmark_id, pixel = observations[0]
            residual = tracker_residual(
                clean_sequence.rig, truth, role, frame.landmarks[landmark_id], pixel
            )
            assert_allclose(residual, 0.0, atol=1e-9)

    def test_frame_jacobian(self, clean_sequence, rng):
        for index, frame in enumerate(clean_sequence.frames):
            problem = FrameProblem(clean_sequence.rig, frame)
            for _ in range(3):
                x = perturbed(clean_sequence.truth[index], rng).as_vector()
                numeric = numeric_jacobian(problem.residual, x)
                assert_allclose(problem.jacobian(x), numeric, rtol=1e-4, atol=1e-3)

    def test_anchored_frame_jacobian(self, clean_sequence, rng):
        frame, truth = clean_sequence.frames[5], clean_sequence.truth[5]
        problem = FrameProblem(clean_sequence.rig, frame, anchor=truth.T_I_W)
        for _ in range(10):
            x = np.concatenate(
                [rng.normal(0.0, 0.02, 6), perturbed(truth, rng).beta.as_array()]
            )
            numeric = numeric_jacobian(problem.residual, x)
            assert_allclose(problem.jacobian(x), numeric, rtol=1e-4, atol=1e-3)

    def test_joint_jacobian(self, clean_sequence, rng):
        rig = clean_sequence.rig
        for trial in range(1000):
            index = trial % len(clean_sequence.frames)
            frame = clean_sequence.frames[index]
            estimate = perturbed(clean_sequence.truth[index], rng)
            landmark_id, pixel = frame.obs_dynamic[
                rng.integers(len(frame.obs_dynamic))
            ]
            landmark = frame.landmarks[landmark_id]

            def residual(beta):
                moved = TrackerEstimate(estimate.T_I_W, JointState(beta))
                return tracker_residual(rig, moved, CameraRole.DYNAMIC, landmark, pixel)

            numeric = numeric_jacobian(residual, estimate.beta.as_array())
            assert_allclose(
                joint_jacobian(rig, estimate, landmark), numeric, rtol=1e-4, atol=1e-3
            )
        assert_allclose(
            joint_jacobian(rig, estimate, landmark, CameraRole.STATIC), 0.0
        )


class TestFrames:
    """Test frame validation."""

    def test_unknown_landmark(self):
        with pytest.raises(ConfigError):
            TrackerFrame(
                timestamp=0.0,
                landmarks={0: (0.0, 0.0, 5.0)},
                obs_static=((1, (320.0, 240.0)),),
            )

    def test_too_few_observations(self, clean_sequence):
        frame = clean_sequence.frames[0]
        sparse = TrackerFrame(
            timestamp=frame.timestamp,
            landmarks=frame.landmarks,
            obs_static=frame.obs_static,
            obs_dynamic=frame.obs_dynamic[:2],
        )
        with pytest.raises(InsufficientObservationsError):
            check_frame(clean_sequence.rig, sparse)

    def test_prior_joint_count(self, clean_sequence):
        prior = TrackerEstimate(clean_sequence.truth[0].T_I_W, JointState((0.0,)))
        with pytest.raises(DimensionMismatchError):
            estimate_frame(clean_sequence.rig, clean_sequence.frames[0], prior)


class TestTracking:
    """Test sequential estimation."""

    def test_single_frame_recovery(self, clean_sequence, rng):
        truth = clean_sequence.truth[4]
        estimate, report = estimate_frame(
            clean_sequence.rig, clean_sequence.frames[4], perturbed(truth, rng)
        )
        assert report.converged
        assert_allclose(estimate.beta.angles, truth.beta.angles, atol=1e-8)
        assert_allclose(estimate.T_I_W.matrix, truth.T_I_W.matrix, atol=1e-8)

    def test_landmark_order_does_not_matter(self, clean_sequence, rng):
        frame = clean_sequence.frames[9]
        prior = perturbed(clean_sequence.truth[9], rng)
        shuffled = TrackerFrame(
            timestamp=frame.timestamp,
            landmarks=dict(reversed(list(frame.landmarks.items()))),
            obs_static=tuple(
                frame.obs_static[i] for i in rng.permutation(len(frame.obs_static))
            ),
            obs_dynamic=tuple(
                frame.obs_dynamic[i] for i in rng.permutation(len(frame.obs_dynamic))
            ),
        )
        first, _ = estimate_frame(clean_sequence.rig, frame, prior)
        second, _ = estimate_frame(clean_sequence.rig, shuffled, prior)
        assert_allclose(second.T_I_W.matrix, first.T_I_W.matrix, atol=1e-10)
        assert_allclose(second.beta.angles, first.beta.angles, atol=1e-10)

    def test_prior_at_pitch_singularity(self, clean_sequence):
        """A body pitched by 90 degrees is refined around the prior directly."""
        frame, truth = clean_sequence.frames[0], clean_sequence.truth[0]
        tilt = pose_to_transform(Pose6(r_y=np.pi / 2))
        turned = TrackerFrame(
            timestamp=frame.timestamp,
            landmarks={i: apply(tilt, p) for i, p in frame.landmarks.items()},
            obs_static=frame.obs_static,
            obs_dynamic=frame.obs_dynamic,
        )
        pose = compose(truth.T_I_W, invert(tilt))
        prior = TrackerEstimate(pose, JointState(np.add(truth.beta.angles, 0.05)))
        with pytest.raises(SingularityError):
            prior.as_vector()

        estimate, report = estimate_frame(clean_sequence.rig, turned, prior)
        assert report.converged
        assert_allclose(estimate.T_I_W.matrix, pose.matrix, atol=1e-8)
        assert_allclose(estimate.beta.angles, truth.beta.angles, atol=1e-8)

    def test_noiseless_sequence(self, clean_sequence):
        estimates, report = track_sequence(
            clean_sequence.rig, clean_sequence.frames, clean_sequence.initial
        )
        assert len(estimates) == 20
        assert report.failed_frames == []
        assert len(report.reports) == 20
        assert max(report.per_joint_rmse_rad) < 1e-8

    def test_failed_frame_keeps_prior(self, clean_sequence):
        frames = list(clean_sequence.frames[:4])
        frames[2] = TrackerFrame(
            timestamp=frames[2].timestamp,
            landmarks=frames[2].landmarks,
            obs_static=frames[2].obs_static[:2],
            obs_dynamic=frames[2].obs_dynamic,
            truth_angles=frames[2].truth_angles,
        )
        estimates, report = track_sequence(
            clean_sequence.rig, frames, clean_sequence.initial
        )
        assert report.failed_frames == [2]
        assert report.reports[2] is None
        assert estimates[2] is estimates[1]
        assert max(report.per_joint_rmse_rad) < 0.1

    def test_static_extrinsic_is_used(self):
        """A non-identity T_s_I is carried through both cameras."""
        config = SequenceConfig(
            num_frames=3,
            pixel_noise_sigma=0.0,
            T_s_I=(0.0, 0.05, 0.0, 0.1, 0.0, 0.0),
        )
        bundle = simulate_sequence(config)
        assert isinstance(bundle.rig, RigExtrinsics)
        assert_allclose(
            bundle.rig.T_s_I.matrix,
            pose_to_transform(Pose6(0.0, 0.05, 0.0, 0.1, 0.0, 0.0)).matrix,
        )
        _, report = track_sequence(bundle.rig, bundle.frames, bundle.initial)
        assert max(report.per_joint_rmse_rad) < 1e-8


@pytest.mark.slow
def test_single_frame_joint_error_under_noise():
    """0.4 px noise and 100 landmarks: 95th percentile joint error below 1e-2 rad."""
    bundle = simulate_sequence(SequenceConfig(num_frames=100, rng_seed=8))
    errors = []
    for frame, truth in zip(bundle.frames, bundle.truth):
        estimate, _ = estimate_frame(bundle.rig, frame, truth)
        errors.extend(np.abs(np.subtract(estimate.beta.angles, truth.beta.angles)))
    assert len(errors) == 200
    assert np.percentile(errors, 95) < 1e-2


@pytest.mark.slow
def test_noisy_sequence_tracks_joints():
    """200 frames at 0.4 px noise track the joints to a few milliradians."""
    bundle = simulate_sequence(SequenceConfig(rng_seed=4))
    _, report = track_sequence(bundle.rig, bundle.frames, bundle.initial)
    assert report.num_frames == 200
    assert not report.failed_frames
    assert max(report.per_joint_rmse_rad) < 1e-2


@pytest.mark.slow
def test_noisy_prior_is_recovered():
    """A prior off by centimeters and degrees is pulled in within a few frames."""
    config = SequenceConfig(
        rng_seed=6,
        prior_noise=InitNoise(sigma_translation_m=0.03, sigma_rotation_rad=0.05),
    )
    bundle = simulate_sequence(config)
    _, report = track_sequence(bundle.rig, bundle.frames, bundle.initial)
    assert max(report.per_joint_rmse_rad) < 4.5e-2
