"""CSV tables and plain-text summaries."""

import csv
import io
from pathlib import Path
from typing import Iterable, List, Sequence, Tuple, Union

import structlog

from ..core.errors import ArtifactMissingError
from ..estimators.base import CalibrationResult
from ..estimators.calibration import TruthErrorReport, evaluate_against_truth
from ..estimators.tracker import AngleTrackReport, TrackerEstimate
from ..model.geometry import transform_to_pose
from ..utils.fileio import atomic_write_text

logger = structlog.get_logger(__name__)

PathLike = Union[str, Path]

REPROJECTION_HEADER = ["dataset", "n_images", "mean_reproj_px", "std_reproj_px"]
JOINT_HEADER = ["joint", "mean_err_rad", "std_err_rad"]
PARAMETER_HEADER = ["param_class", "mean_err", "std_err", "unit"]

STUDY_ARTIFACTS = (
    "calibration/result.yaml",
    "calibration/truth.yaml",
    "validation/result.yaml",
    "validation/truth.yaml",
)
TABLE_FILES = ("table_i.csv", "table_ii.csv", "table_iii.csv", "summary.txt")

ReprojectionRow = Tuple[str, int, float, float]
JointRow = Tuple[str, float, float]
ParameterRow = Tuple[str, float, float, str]


def _fmt(value: object) -> str:
    if isinstance(value, float):
        return repr(value)
    return str(value)


def render_csv(header: Sequence[str], rows: Iterable[Sequence[object]]) -> str:
    buffer = io.StringIO()
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(header)
    for row in rows:
        writer.writerow([_fmt(v) for v in row])
    return buffer.getvalue()


def write_csv(
    path: PathLike, header: Sequence[str], rows: Iterable[Sequence[object]]
) -> None:
    atomic_write_text(path, render_csv(header, rows))


def reprojection_row(name: str, result: CalibrationResult) -> ReprojectionRow:
    return (name, result.estimate.num_sets, result.stats.mean_px, result.stats.std_px)


def joint_error_rows(
    calibration: TruthErrorReport, validation: TruthErrorReport
) -> List[JointRow]:
    """(dataset/joint_l, mean_err_rad, std_err_rad)."""
    rows = []
    for name, report in (("calibration", calibration), ("validation", validation)):
        pairs = zip(report.joint_mean_rad, report.joint_std_rad)
        for index, (mean, std) in enumerate(pairs):
            rows.append((f"{name}/joint_{index + 1}", mean, std))
    return rows


def parameter_error_rows(report: TruthErrorReport) -> List[ParameterRow]:
    """(param_class, mean_err, std_err, unit)."""
    return [
        ("translation", report.translation_mean_m, report.translation_std_m, "m"),
        ("rotation", report.rotation_mean_rad, report.rotation_std_rad, "rad"),
    ]


def format_summary(
    reprojection: Sequence[ReprojectionRow],
    joints: Sequence[JointRow],
    parameters: Sequence[ParameterRow],
    results: Sequence[Tuple[str, CalibrationResult]] = (),
    truths: Sequence[Tuple[str, TruthErrorReport]] = (),
) -> str:
    """Plain-text rendering of the three study tables."""
    lines = ["Reprojection error"]
    for name, count, mean, std in reprojection:
        lines.append(
            f"  {name:<12} images={count:<4d} mean={mean:.6f} px  std={std:.6f} px"
        )
    for name, result in results:
        stats = result.stats
        lines.append(
            f"  {name:<12} rms={stats.rms_px:.6f} px"
            f"  static={stats.mean_static_px:.6f} px"
            f"  dynamic={stats.mean_dynamic_px:.6f} px"
        )
    lines.append("Joint angle error")
    for name, mean, std in joints:
        lines.append(f"  {name:<22} mean={mean:.6e} rad  std={std:.6e} rad")
    lines.append("Parameter error")
    for name, mean, std, unit in parameters:
        lines.append(f"  {name:<12} mean={mean:.6e} {unit}  std={std:.6e} {unit}")
    for name, truth in truths:
        lines.append(
            f"  {name} chain: rotation<={truth.chain_rotation_max_rad:.3e} rad"
            f"  translation<={truth.chain_translation_max_m:.3e} m"
            f"  gauge_aligned={truth.gauge_aligned}"
        )
    return "\n".join(lines) + "\n"


def missing_study_artifacts(study_dir: PathLike) -> List[str]:
    study_dir = Path(study_dir)
    return [name for name in STUDY_ARTIFACTS if not (study_dir / name).is_file()]


def write_study_tables(
    out_dir: PathLike,
    calibration: CalibrationResult,
    validation: CalibrationResult,
    calibration_truth: TruthErrorReport,
    validation_truth: TruthErrorReport,
) -> List[Path]:
    """Write the reprojection, joint and parameter tables plus summary.txt."""
    out_dir = Path(out_dir)
    reprojection = [
        reprojection_row("calibration", calibration),
        reprojection_row("validation", validation),
    ]
    joints = joint_error_rows(calibration_truth, validation_truth)
    parameters = parameter_error_rows(calibration_truth)
    paths = [out_dir / name for name in TABLE_FILES]
    write_csv(paths[0], REPROJECTION_HEADER, reprojection)
    write_csv(paths[1], JOINT_HEADER, joints)
    write_csv(paths[2], PARAMETER_HEADER, parameters)
    atomic_write_text(
        paths[3],
        format_summary(
            reprojection,
            joints,
            parameters,
            results=[("calibration", calibration), ("validation", validation)],
            truths=[
                ("calibration", calibration_truth),
                ("validation", validation_truth),
            ],
        ),
    )
    logger.info("Wrote study tables", out_dir=str(out_dir))
    return paths


def generate_report(study_dir: PathLike, align_gauge: bool = True) -> List[Path]:
    """Rebuild the study tables from the artifacts of a study directory.

    Raises:
        ArtifactMissingError: any expected artifact is absent.
    """
    from .files import load_result, load_truth

    study_dir = Path(study_dir)
    missing = missing_study_artifacts(study_dir)
    if missing:
        raise ArtifactMissingError(missing)
    calibration = load_result(study_dir / "calibration/result.yaml")
    validation = load_result(study_dir / "validation/result.yaml")
    cal_truth = load_truth(study_dir / "calibration/truth.yaml")
    val_truth = load_truth(study_dir / "validation/truth.yaml")
    return write_study_tables(
        study_dir,
        calibration,
        validation,
        evaluate_against_truth(
            calibration, cal_truth.truth_model, cal_truth.truth_angles, align_gauge
        ),
        evaluate_against_truth(
            validation, val_truth.truth_model, val_truth.truth_angles, align_gauge
        ),
    )


def write_track_csv(
    path: PathLike, timestamps: Sequence[float], estimates: Sequence[TrackerEstimate]
) -> None:
    """timestamp_s, the six pose parameters of T_I_W and the joint angles."""
    num_links = len(estimates[0].beta) if estimates else 0
    header = ["timestamp_s", "r_x", "r_y", "r_z", "t_x", "t_y", "t_z"] + [
        f"theta_{l + 1}" for l in range(num_links)
    ]
    rows = []
    for t, estimate in zip(timestamps, estimates):
        pose = transform_to_pose(estimate.T_I_W).as_array().tolist()
        rows.append([float(t)] + pose + list(estimate.beta.angles))
    write_csv(path, header, rows)


def format_track_summary(report: AngleTrackReport) -> str:
    lines = [f"frames: {report.num_frames}", f"failed: {len(report.failed_frames)}"]
    if report.failed_frames:
        failed = ",".join(str(i) for i in report.failed_frames)
        lines.append(f"failed_frames: {failed}")
    if report.per_joint_rmse_rad is not None:
        for index, rmse in enumerate(report.per_joint_rmse_rad):
            lines.append(f"joint_{index + 1}_rmse_rad: {rmse!r}")
    return "\n".join(lines) + "\n"
