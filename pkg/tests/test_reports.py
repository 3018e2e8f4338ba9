"""Test cases for study tables and summaries."""

import csv

import pytest

from dccal.core.errors import ArtifactMissingError
from dccal.estimators.tracker import AngleTrackReport, TrackerEstimate
from dccal.io.files import save_result, save_truth
from dccal.io.reports import (
    JOINT_HEADER,
    PARAMETER_HEADER,
    REPROJECTION_HEADER,
    TABLE_FILES,
    format_track_summary,
    generate_report,
    missing_study_artifacts,
    render_csv,
    write_study_tables,
    write_track_csv,
)
from dccal.model.geometry import RigidTransform
from dccal.model.kinematics import JointState
from dccal.simulation.simulator import InitNoise, run_sim_study

from .conftest import small_config

SMALL_NOISE = InitNoise(sigma_translation_m=0.005, sigma_rotation_rad=0.02)


@pytest.fixture(scope="module")
def study():
    calibration = small_config(init_noise=SMALL_NOISE)
    validation = small_config(
        init_noise=SMALL_NOISE, sampling="random", num_random_sets=12, rng_seed=1
    )
    return run_sim_study(calibration, validation)


@pytest.fixture
def study_dir(tmp_path, study):
    for name, result, bundle in (
        ("calibration", study.calibration, study.calibration_bundle),
        ("validation", study.validation, study.validation_bundle),
    ):
        save_result(tmp_path / name / "result.yaml", result)
        save_truth(
            tmp_path / name / "truth.yaml",
            bundle.truth_model,
            bundle.truth_angles,
            bundle.perturbed_init_model,
            bundle.perturbed_init_angles,
        )
    return tmp_path


def read_rows(path):
    with open(path, newline="") as f:
        return list(csv.reader(f))


class TestCsv:
    """Test CSV rendering."""

    def test_floats_keep_full_precision(self):
        text = render_csv(["a", "b"], [("x", 0.1 + 0.2)])
        assert text == "a,b\nx,0.30000000000000004\n"


class TestStudyTables:
    """Test the three study tables."""

    def test_headers_and_rows(self, tmp_path, study):
        paths = write_study_tables(
            tmp_path,
            study.calibration,
            study.validation,
            study.calibration_truth,
            study.validation_truth,
        )
        assert [p.name for p in paths] == list(TABLE_FILES)
        reprojection = read_rows(tmp_path / "table_i.csv")
        assert reprojection[0] == REPROJECTION_HEADER
        assert reprojection[1][:2] == ["calibration", "16"]
        validation_sets = str(study.validation.estimate.num_sets)
        assert reprojection[2][:2] == ["validation", validation_sets]
        joints = read_rows(tmp_path / "table_ii.csv")
        assert joints[0] == JOINT_HEADER
        assert len(joints) == 5
        parameters = read_rows(tmp_path / "table_iii.csv")
        assert parameters[0] == PARAMETER_HEADER
        assert [row[3] for row in parameters[1:]] == ["m", "rad"]
        summary = (tmp_path / "summary.txt").read_text()
        assert "Reprojection error" in summary
        assert "calibration/joint_2" in summary

    def test_report_regenerates_identical_tables(self, study_dir, study):
        write_study_tables(
            study_dir,
            study.calibration,
            study.validation,
            study.calibration_truth,
            study.validation_truth,
        )
        first = {name: (study_dir / name).read_text() for name in TABLE_FILES[:3]}
        generate_report(study_dir)
        again = {name: (study_dir / name).read_text() for name in TABLE_FILES[:3]}
        assert again == first

    def test_missing_artifacts(self, study_dir):
        (study_dir / "validation" / "truth.yaml").unlink()
        assert missing_study_artifacts(study_dir) == ["validation/truth.yaml"]
        with pytest.raises(ArtifactMissingError) as info:
            generate_report(study_dir)
        assert info.value.exit_code == 1


class TestTrackOutputs:
    """Test tracker CSV and summary."""

    def test_track_csv(self, tmp_path):
        estimates = [
            TrackerEstimate(RigidTransform.identity(), JointState((0.1, -0.2))),
            TrackerEstimate(RigidTransform.identity(), JointState((0.2, -0.1))),
        ]
        path = tmp_path / "track.csv"
        write_track_csv(path, [0.0, 0.05], estimates)
        rows = read_rows(path)
        assert rows[0][-2:] == ["theta_1", "theta_2"]
        assert rows[0][:7] == ["timestamp_s", "r_x", "r_y", "r_z", "t_x", "t_y", "t_z"]
        assert rows[2][0] == "0.05"
        assert rows[2][-2:] == ["0.2", "-0.1"]

    def test_summary(self):
        report = AngleTrackReport(
            num_frames=10, per_joint_rmse_rad=(0.001, 0.002), failed_frames=[3, 7]
        )
        assert format_track_summary(report) == (
            "frames: 10\n"
            "failed: 2\n"
            "failed_frames: 3,7\n"
            "joint_1_rmse_rad: 0.001\n"
            "joint_2_rmse_rad: 0.002\n"
        )
