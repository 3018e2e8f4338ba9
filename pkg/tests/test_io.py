"""Test cases for the file formats."""

import pytest
import yaml
from numpy.testing import assert_allclose, assert_array_equal

from dccal.core.errors import ConfigError
from dccal.estimators.calibration import validate
from dccal.io.files import (
    load_dataset,
    load_init,
    load_result,
    load_sequence,
    load_truth,
    save_dataset,
    save_init,
    save_rejections,
    save_result,
    save_sequence,
    save_truth,
)
from dccal.io.schemas import SCHEMA_VERSION, DatasetFile, RejectionReportFile
from dccal.model.kinematics import pack_parameters
from dccal.simulation.sequences import SequenceConfig, simulate_sequence
from dccal.simulation.simulator import RejectedSet
from dccal.utils.fileio import load_yaml


@pytest.fixture(scope="module")
def validation_result(noiseless_bundle):
    bundle = noiseless_bundle
    return validate(bundle.dataset, bundle.truth_model, bundle.perturbed_init_angles)


class TestDatasetFile:
    """Test dataset serialization."""

    def test_round_trip(self, tmp_path, noisy_bundle):
        path = tmp_path / "dataset.yaml"
        save_dataset(path, noisy_bundle.dataset)
        loaded = load_dataset(path)
        assert loaded.num_sets == noisy_bundle.dataset.num_sets
        assert loaded.target == noisy_bundle.dataset.target
        assert loaded.intrinsics_d == noisy_bundle.dataset.intrinsics_d
        for original, copy in zip(noisy_bundle.dataset.sets, loaded.sets):
            assert_array_equal(copy.point_ids, original.point_ids)
            assert_array_equal(copy.q_d, original.q_d)
            assert_array_equal(copy.p_s, original.p_s)
            assert copy.known_angles == original.known_angles

    def test_schema_version_written(self, tmp_path, noiseless_bundle):
        path = tmp_path / "dataset.yaml"
        save_dataset(path, noiseless_bundle.dataset)
        assert load_yaml(path)["schema_version"] == SCHEMA_VERSION

    def test_unknown_schema_version(self, tmp_path, noiseless_bundle):
        path = tmp_path / "dataset.yaml"
        save_dataset(path, noiseless_bundle.dataset)
        data = load_yaml(path)
        data["schema_version"] = 99
        path.write_text(yaml.safe_dump(data))
        with pytest.raises(ConfigError) as info:
            load_dataset(path)
        assert "schema_version" in str(info.value)

    def test_empty_dataset_rejected(self, noiseless_bundle):
        schema = DatasetFile.from_dataset(noiseless_bundle.dataset)
        data = schema.model_dump(mode="json")
        data["sets"] = []
        with pytest.raises(ConfigError):
            DatasetFile.from_dict(data)


class TestResultFile:
    """Test calibration result serialization."""

    def test_round_trip(self, tmp_path, validation_result):
        path = tmp_path / "result.yaml"
        save_result(path, validation_result)
        loaded = load_result(path)
        assert loaded.estimate.mode == validation_result.estimate.mode
        assert_array_equal(
            pack_parameters(loaded.estimate.model),
            pack_parameters(validation_result.estimate.model),
        )
        assert_array_equal(
            loaded.estimate.angle_matrix(), validation_result.estimate.angle_matrix()
        )
        assert loaded.stats == validation_result.stats
        assert loaded.report.termination == validation_result.report.termination
        assert loaded.report.final_cost == validation_result.report.final_cost

    def test_layout(self, tmp_path, validation_result):
        path = tmp_path / "result.yaml"
        save_result(path, validation_result)
        data = load_yaml(path)
        assert data["mode"] == "validation"
        assert data["L"] == 2
        assert len(data["dh"]) == 2
        assert len(data["joint_angles_rad"]) == validation_result.estimate.num_sets


class TestSidecars:
    """Test truth, init and rejection files."""

    def test_truth_round_trip(self, tmp_path, noisy_bundle):
        path = tmp_path / "truth.yaml"
        save_truth(
            path,
            noisy_bundle.truth_model,
            noisy_bundle.truth_angles,
            noisy_bundle.perturbed_init_model,
            noisy_bundle.perturbed_init_angles,
        )
        record = load_truth(path)
        assert record.truth_angles == noisy_bundle.truth_angles
        assert record.init_angles == noisy_bundle.perturbed_init_angles
        assert_allclose(
            pack_parameters(record.truth_model),
            pack_parameters(noisy_bundle.truth_model),
            atol=1e-15,
        )

    def test_init_without_angles(self, tmp_path, truth_model):
        path = tmp_path / "init.yaml"
        save_init(path, truth_model)
        model, angles = load_init(path)
        assert angles is None
        assert model.num_links == 2

    def test_rejections(self, tmp_path, noiseless_bundle):
        path = tmp_path / "rejections.yaml"
        rejected = [RejectedSet(3, noiseless_bundle.truth_angles[0], "out of view")]
        save_rejections(path, kept=15, rejected=rejected)
        report = RejectionReportFile.from_file(path)
        assert report.kept == 15
        assert report.rejected[0].index == 3
        assert report.rejected[0].reason == "out of view"


class TestSequenceFile:
    """Test tracking sequence serialization."""

    def test_round_trip(self, tmp_path):
        bundle = simulate_sequence(SequenceConfig(num_frames=3))
        path = tmp_path / "sequence.yaml"
        save_sequence(
            path,
            bundle.rig.intrinsics_s,
            bundle.rig.intrinsics_d,
            bundle.rig.T_s_I,
            bundle.frames,
            bundle.initial,
        )
        record = load_sequence(path)
        assert len(record.frames) == 3
        first, copy = bundle.frames[1], record.frames[1]
        assert copy.timestamp == first.timestamp
        assert [i for i, _ in copy.obs_dynamic] == [i for i, _ in first.obs_dynamic]
        assert_array_equal(copy.obs_static[0][1], first.obs_static[0][1])
        assert copy.truth_angles == first.truth_angles
        assert_allclose(copy.truth_pose.matrix, first.truth_pose.matrix, atol=1e-12)
        assert_allclose(
            record.initial.as_vector(), bundle.initial.as_vector(), atol=1e-12
        )


class TestYamlDiagnostics:
    """Test located YAML errors."""

    def test_syntax_error_has_line(self, tmp_path):
        path = tmp_path / "broken.yaml"
        path.write_text("rng_seed: 1\njoint_grid: [\n  - oops: {\n")
        with pytest.raises(ConfigError) as info:
            load_yaml(path)
        assert f"{path}:" in str(info.value)

    def test_not_a_mapping(self, tmp_path):
        path = tmp_path / "list.yaml"
        path.write_text("- 1\n- 2\n")
        with pytest.raises(ConfigError) as info:
            load_yaml(path)
        assert "mapping" in str(info.value)

    def test_missing_file(self, tmp_path):
        with pytest.raises(ConfigError):
            load_yaml(tmp_path / "absent.yaml")

    def test_field_path_in_message(self, tmp_path):
        path = tmp_path / "init.yaml"
        path.write_text(
            "model:\n"
            "  tau_d: [0, 0, 0]\n"
            "  dh: [[0, 0, 0]]\n"
            "  tau_s: [0, 0, 0, 0, 0, 0]\n"
        )
        with pytest.raises(ConfigError) as info:
            load_init(path)
        assert "model.tau_d" in str(info.value)
