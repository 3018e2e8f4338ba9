"""Test cases for dataset synthesis and the simulation study."""

import numpy as np
import pytest
from numpy.testing import assert_allclose, assert_array_equal

from dccal.core.errors import AllSetsRejectedError, ConfigError
from dccal.model.kinematics import (
    JointState,
    pack_parameters,
    translation_role_mask,
)
from dccal.simulation.sequences import (
    SequenceConfig,
    body_pose,
    joint_trajectory,
    simulate_sequence,
)
from dccal.simulation.simulator import (
    InitNoise,
    JointRange,
    SimulationConfig,
    default_truth_model,
    perturb_initialization,
    run_sim_study,
    sample_configurations,
    synthesize_dataset,
)

from .conftest import small_config


class TestSampling:
    """Test joint configuration sampling."""

    def test_default_grid(self):
        config = SimulationConfig.create_default()
        states = sample_configurations(config.joint_grid)
        assert len(states) == 81
        assert states[0].angles == pytest.approx((-0.6, -0.3))
        assert states[1].angles == pytest.approx((-0.6, -0.225))
        assert states[9].angles == pytest.approx((-0.45, -0.3))
        assert states[-1].angles == pytest.approx((0.6, 0.3))

    def test_single_value_axis(self):
        grid = [
            JointRange(min_rad=0.1, max_rad=0.1, count=1),
            JointRange(min_rad=-0.2, max_rad=-0.2, count=1),
        ]
        assert sample_configurations(grid) == [JointState((0.1, -0.2))]

    def test_range_order_validated(self):
        with pytest.raises(ValueError):
            JointRange(min_rad=0.5, max_rad=-0.5, count=3)


class TestSimulationConfig:
    """Test protocol validation."""

    def test_grid_must_match_links(self):
        with pytest.raises(ConfigError) as info:
            SimulationConfig.from_dict(
                {"joint_grid": [{"min_rad": 0.0, "max_rad": 1.0, "count": 2}]}
            )
        assert "joint_grid" in str(info.value)

    def test_unknown_field(self):
        with pytest.raises(ConfigError):
            SimulationConfig.from_dict({"pixel_noise": 0.4})

    def test_validation_defaults(self):
        config = SimulationConfig.create_default_validation()
        assert config.sampling == "random"
        assert config.num_random_sets == 81
        assert config.rng_seed == 1

    def test_study_truth_models_must_match(self):
        calibration = small_config()
        other = calibration.truth_model.model_copy(update={"tau_s": (0.0,) * 6})
        with pytest.raises(ConfigError):
            run_sim_study(calibration, small_config(truth_model=other))

    def test_yaml_round_trip(self, tmp_path):
        config = small_config(pixel_noise_sigma=0.25)
        path = tmp_path / "config.yaml"
        config.save_to_file(path)
        assert SimulationConfig.from_file(path) == config


class TestSynthesis:
    """Test measurement synthesis."""

    def test_default_protocol_keeps_every_set(self):
        bundle = synthesize_dataset(SimulationConfig.create_default())
        assert bundle.dataset.num_sets == 81
        assert not bundle.rejected
        assert bundle.dataset.has_known_angles
        assert all(s.num_points == 63 for s in bundle.dataset.sets)

    def test_wide_second_joint_range_leaves_view(self):
        """Swinging the second joint by +/-0.6 rad takes the board out of view."""
        wide = JointRange(min_rad=-0.6, max_rad=0.6, count=9)
        bundle = synthesize_dataset(SimulationConfig(joint_grid=[wide, wide]))
        assert bundle.rejected
        assert bundle.dataset.num_sets + len(bundle.rejected) == 81
        assert all("out of view" in r.reason for r in bundle.rejected)

    def test_single_configuration(self):
        config = small_config(
            joint_grid=[
                JointRange(min_rad=0.0, max_rad=0.0, count=1),
                JointRange(min_rad=0.0, max_rad=0.0, count=1),
            ]
        )
        bundle = synthesize_dataset(config)
        assert bundle.dataset.num_sets == 1
        assert bundle.truth_angles == (JointState((0.0, 0.0)),)

    def test_target_behind_camera(self):
        config = small_config(target_pose=(0.0, 0.0, 0.0, 0.0, 0.0, -1.0))
        with pytest.raises(AllSetsRejectedError) as info:
            synthesize_dataset(config)
        assert info.value.exit_code == 2

    def test_noiseless_observations_match_projection(self, noiseless_bundle):
        bundle = noiseless_bundle
        for mset, beta in zip(bundle.dataset.sets, bundle.truth_angles):
            assert mset.known_angles == beta
        assert noiseless_bundle.dataset.sets[0].q_s.shape == (63, 2)

    def test_worker_count_does_not_change_dataset(self):
        config = small_config(rng_seed=11)
        serial = synthesize_dataset(config, workers=1)
        threaded = synthesize_dataset(config, workers=4)
        for a, b in zip(serial.dataset.sets, threaded.dataset.sets):
            assert_array_equal(a.q_s, b.q_s)
            assert_array_equal(a.q_d, b.q_d)
            assert_array_equal(a.p_s, b.p_s)
        assert_array_equal(
            pack_parameters(serial.perturbed_init_model),
            pack_parameters(threaded.perturbed_init_model),
        )

    def test_seed_changes_noise(self):
        first = synthesize_dataset(small_config(rng_seed=1))
        second = synthesize_dataset(small_config(rng_seed=2))
        assert not np.array_equal(first.dataset.sets[0].q_s, second.dataset.sets[0].q_s)

    def test_random_sampling_within_ranges(self):
        config = small_config(sampling="random", num_random_sets=12, rng_seed=5)
        bundle = synthesize_dataset(config)
        angles = np.array([s.angles for s in bundle.truth_angles])
        assert angles.shape[0] + len(bundle.rejected) == 12
        assert np.all(np.abs(angles[:, 0]) <= 0.6)
        assert np.all(np.abs(angles[:, 1]) <= 0.3)

    def test_pixel_noise_level(self):
        noisy = synthesize_dataset(SimulationConfig.create_default())
        clean = synthesize_dataset(SimulationConfig(pixel_noise_sigma=0.0))
        differences = np.concatenate(
            [
                np.concatenate([a.q_s - b.q_s, a.q_d - b.q_d]).ravel()
                for a, b in zip(noisy.dataset.sets, clean.dataset.sets)
            ]
        )
        assert differences.size == 81 * 63 * 4
        assert 0.38 <= differences.std() <= 0.42
        assert abs(differences.mean()) < 0.02

    def test_per_set_target_poses_checked(self):
        config = small_config(target_poses=[(0.0, 0.0, 0.0, 0.0, 0.0, 1.0)])
        with pytest.raises(ConfigError):
            synthesize_dataset(config)


class TestPerturbation:
    """Test initialization noise."""

    def test_zero_noise_is_identity(self, truth_model, rng):
        angles = [JointState((0.1, -0.2)), JointState((0.3, 0.0))]
        noise = InitNoise(sigma_translation_m=0.0, sigma_rotation_rad=0.0)
        model, noisy = perturb_initialization(truth_model, angles, noise, rng)
        assert_array_equal(pack_parameters(model), pack_parameters(truth_model))
        assert noisy == angles

    def test_noise_scales_by_role(self, truth_model):
        rng = np.random.default_rng(0)
        truth = pack_parameters(truth_model)
        deltas = []
        for _ in range(10_000):
            model, _ = perturb_initialization(truth_model, [], InitNoise(), rng)
            deltas.append(pack_parameters(model) - truth)
        deltas = np.array(deltas)
        mask = translation_role_mask(truth_model.num_links)
        spread = deltas.std(axis=0)
        assert np.all((spread[mask] > 0.027) & (spread[mask] < 0.033))
        degrees = np.rad2deg(spread[~mask])
        assert np.all((degrees > 9.0) & (degrees < 11.0))

        correlation = np.corrcoef(deltas, rowvar=False)
        off_diagonal = correlation[~np.eye(truth.shape[0], dtype=bool)]
        assert np.max(np.abs(off_diagonal)) < 0.05

    def test_joint_angle_noise(self, truth_model):
        angles = [JointState((0.1, -0.2))] * 5000
        _, noisy = perturb_initialization(
            truth_model, angles, InitNoise(), np.random.default_rng(1)
        )
        deltas = np.array([s.angles for s in noisy]) - [0.1, -0.2]
        assert deltas.size == 10_000
        degrees = np.rad2deg(deltas.std(axis=0))
        assert np.all((degrees > 9.0) & (degrees < 11.0))
        assert abs(np.corrcoef(deltas[:, 0], deltas[:, 1])[0, 1]) < 0.05


@pytest.mark.slow
class TestSimulationStudy:
    """Test the end-to-end calibration and validation study."""

    @pytest.fixture(scope="class")
    def reports(self):
        """Default protocol at three seeds, validation seeded one above."""
        return [
            run_sim_study(
                SimulationConfig.create_default().with_seed(seed),
                SimulationConfig.create_default_validation().with_seed(seed + 1),
                workers=4,
            )
            for seed in (0, 1, 2)
        ]

    def test_reprojection_error_matches_pixel_noise(self, reports):
        for name in ("calibration", "validation"):
            stats = [getattr(report, name).stats for report in reports]
            rms = np.array([s.rms_px for s in stats])
            assert np.all((rms >= 0.30) & (rms <= 0.48))
            assert rms.std() < 0.05
            # Mean of 2D norms for iid Gaussian components is sigma * sqrt(pi / 2).
            ratio = np.array([s.mean_px for s in stats]) / rms
            assert_allclose(ratio, np.sqrt(np.pi / 2.0), atol=0.06)

    def test_joint_and_parameter_errors(self, reports):
        for report in reports:
            assert report.calibration.converged
            assert max(report.calibration_truth.joint_mean_rad) <= 2e-2
            assert max(report.validation_truth.joint_mean_rad) <= 2e-2
            assert report.calibration_truth.translation_mean_m <= 1e-2
            assert report.calibration_truth.rotation_mean_rad <= 1e-2

    def test_table_rows(self, reports):
        report = reports[0]
        assert [row[0] for row in report.reprojection_rows()] == [
            "calibration",
            "validation",
        ]
        assert [row[0] for row in report.joint_rows()] == [
            "calibration/joint_1",
            "calibration/joint_2",
            "validation/joint_1",
            "validation/joint_2",
        ]
        classes = [row[0] for row in report.parameter_rows()]
        assert classes == ["translation", "rotation"]


class TestSequences:
    """Test synthetic tracking sequences."""

    def test_trajectory_follows_sinusoid(self):
        config = SequenceConfig()
        assert_allclose(joint_trajectory(config, 0.0).angles, (0.0, 0.2), atol=1e-15)
        assert_allclose(
            joint_trajectory(config, 1.0).angles,
            (0.4, 0.2 * np.cos(0.3 * np.pi)),
            atol=1e-12,
        )

    def test_body_starts_at_origin(self):
        pose = body_pose(SequenceConfig(), 0.0)
        assert_allclose(pose.matrix, np.eye(4), atol=1e-15)

    def test_per_joint_lists_checked(self):
        with pytest.raises(ConfigError):
            SequenceConfig.from_dict({"joint_amplitude_rad": [0.4]})

    def test_frames_carry_truth(self):
        config = SequenceConfig(num_frames=5, pixel_noise_sigma=0.0)
        bundle = simulate_sequence(config)
        assert len(bundle.frames) == 5
        assert bundle.frames[2].timestamp == pytest.approx(0.1)
        assert bundle.frames[0].truth_angles == bundle.truth[0].beta
        assert len(bundle.frames[0].obs_static) == config.num_landmarks
        assert len(bundle.frames[0].obs_dynamic) >= 3
        assert bundle.initial.beta == bundle.truth[0].beta
        assert default_truth_model() == config.truth_model.to_model()
