"""Command line interface for dccal."""

from contextlib import contextmanager
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterator, List, Optional

import structlog
import typer
from rich.console import Console
from rich.table import Table

from .core.config import RunConfig, YamlModel
from .core.errors import ConfigError, DccError, NonConvergenceError
from .estimators.base import CalibrationResult
from .estimators.calibration import create_registry, evaluate_against_truth
from .estimators.tracker import RigExtrinsics, track_sequence
from .io.files import (
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
from .io.reports import (
    REPROJECTION_HEADER,
    format_track_summary,
    generate_report,
    reprojection_row,
    write_csv,
    write_study_tables,
    write_track_csv,
)
from .simulation.sequences import SequenceConfig, simulate_sequence
from .simulation.simulator import (
    SimulationBundle,
    SimulationConfig,
    run_sim_study,
    synthesize_dataset,
)
from .utils.fileio import atomic_write_text
from .utils.logging import setup_logging

app = typer.Typer(
    help="dccal - dynamic camera cluster calibration and joint angle tracking"
)
console = Console()
err_console = Console(stderr=True)
logger = structlog.get_logger(__name__)

CALIBRATION_MODES = ("encoderless", "encoders")
CONFIG_KINDS = ("calibration", "validation", "sequence", "run")


@dataclass
class CliState:
    run: RunConfig = field(default_factory=RunConfig)
    out: Optional[Path] = None

    @property
    def workers(self) -> int:
        return self.run.effective_workers

    def resolve_out(self, out: Optional[Path], default: str) -> Path:
        """Command option, else global --out joined with default, else default."""
        if out is not None:
            return out
        if self.out is not None:
            return self.out / default
        return Path(default)

    def seeded(self, config: SimulationConfig, offset: int = 0) -> SimulationConfig:
        if self.run.seed is None:
            return config
        return config.with_seed(self.run.seed + offset)


@contextmanager
def _reported_errors() -> Iterator[None]:
    """Map dccal errors to their exit codes with a message on stderr."""
    try:
        yield
    except DccError as e:
        err_console.print(f"Error: {e}", style="red", markup=False, highlight=False)
        raise typer.Exit(e.exit_code)


def _state(ctx: typer.Context) -> CliState:
    if not isinstance(ctx.obj, CliState):
        ctx.obj = CliState()
    return ctx.obj


def _load_config(model: type, path: Optional[Path], default: YamlModel) -> YamlModel:
    return default if path is None else model.from_file(path)


@app.callback()
def main_callback(
    ctx: typer.Context,
    seed: Optional[int] = typer.Option(
        None, "--seed", help="Random seed overriding configuration files"
    ),
    serial: bool = typer.Option(
        False, "--serial", help="Single-threaded deterministic execution"
    ),
    config_file: Optional[Path] = typer.Option(
        None, "--config", "-c", help="Run configuration file (solver, workers, gates)"
    ),
    out: Optional[Path] = typer.Option(
        None, "--out", help="Base output directory for commands without --out"
    ),
    verbose: bool = typer.Option(False, "--verbose", "-v", help="Debug logging"),
    json_logs: bool = typer.Option(False, "--json-logs", help="JSON log lines"),
):
    """Global options shared by every command."""
    with _reported_errors():
        run = RunConfig() if config_file is None else RunConfig.from_file(config_file)
    updates = {}
    if seed is not None:
        updates["seed"] = seed
    if serial:
        updates["serial"] = True
    if verbose:
        updates["verbose"] = True
    if json_logs:
        updates["json_logs"] = True
    run = run.model_copy(update=updates)
    setup_logging(run.log_level, run.json_logs)
    ctx.obj = CliState(run=run, out=out)


def _print_reprojection(title: str, rows: List[tuple]) -> None:
    table = Table(title=title)
    table.add_column("Dataset", style="cyan")
    table.add_column("Images", justify="right")
    table.add_column("Mean (px)", justify="right", style="green")
    table.add_column("Std (px)", justify="right", style="green")
    for name, count, mean, std in rows:
        table.add_row(name, str(count), f"{mean:.6f}", f"{std:.6f}")
    console.print(table)


def _write_result(path: Path, name: str, result: CalibrationResult) -> None:
    """Result file plus a one-row reprojection CSV next to it."""
    save_result(path, result)
    write_csv(
        path.with_suffix(".csv"), REPROJECTION_HEADER, [reprojection_row(name, result)]
    )
    _print_reprojection("Reprojection error", [reprojection_row(name, result)])
    console.print(f"[green]Result written: {path}[/green]")


def _exit_unless_converged(result: CalibrationResult) -> None:
    if not result.converged:
        report = result.report
        raise NonConvergenceError(
            f"Solver stopped with {report.termination.value} after "
            f"{report.iterations} iterations; result written anyway"
        )


def _write_bundle(out_dir: Path, bundle: SimulationBundle) -> None:
    save_dataset(out_dir / "dataset.yaml", bundle.dataset)
    save_truth(
        out_dir / "truth.yaml",
        bundle.truth_model,
        bundle.truth_angles,
        bundle.perturbed_init_model,
        bundle.perturbed_init_angles,
    )
    save_init(
        out_dir / "init.yaml", bundle.perturbed_init_model, bundle.perturbed_init_angles
    )
    save_rejections(
        out_dir / "rejections.yaml", bundle.dataset.num_sets, bundle.rejected
    )


@app.command()
def simulate(
    ctx: typer.Context,
    config_path: Path = typer.Argument(help="Simulation configuration file"),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory"),
):
    """Synthesize a dataset with its truth sidecar and rejection report."""
    state = _state(ctx)
    with _reported_errors():
        config = state.seeded(SimulationConfig.from_file(config_path))
        run = state.run
        bundle = synthesize_dataset(
            config,
            workers=state.workers,
            min_common_points=run.min_common_points,
            pnp_max_rms_px=run.pnp_max_rms_px,
            use_true_points=run.use_true_points,
        )
        out_dir = state.resolve_out(out, "simulation")
        _write_bundle(out_dir, bundle)
    console.print(
        f"[green]Dataset written: {out_dir / 'dataset.yaml'} "
        f"({bundle.dataset.num_sets} sets, {len(bundle.rejected)} rejected)[/green]"
    )


@app.command()
def calibrate(
    ctx: typer.Context,
    dataset_path: Path = typer.Argument(help="Dataset file"),
    init_path: Path = typer.Option(..., "--init", "-i", help="Initial guess file"),
    mode: str = typer.Option(
        "encoderless", "--mode", "-m", help="encoderless or encoders"
    ),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Result file"),
):
    """Estimate the kinematic chain (and joint angles when encoderless)."""
    state = _state(ctx)
    with _reported_errors():
        if mode not in CALIBRATION_MODES:
            raise ConfigError(
                f"Unknown calibration mode '{mode}'; "
                f"available: {', '.join(CALIBRATION_MODES)}"
            )
        dataset = load_dataset(dataset_path)
        init_model, init_angles = load_init(init_path)
        if mode == "encoderless" and init_angles is None:
            if not dataset.has_known_angles:
                raise ConfigError(
                    f"{init_path}: joint_angles_rad is required for encoderless mode"
                )
            init_angles = [s.known_angles for s in dataset.sets]
        estimator = create_registry().create(
            mode,
            dataset,
            state.run.solver,
            workers=state.workers,
            min_sets=state.run.min_sets,
            force=state.run.force,
        )
        result = estimator.calibrate(init_model, init_angles)
        _write_result(state.resolve_out(out, "result.yaml"), "calibration", result)
        _exit_unless_converged(result)


@app.command()
def validate(
    ctx: typer.Context,
    dataset_path: Path = typer.Argument(help="Dataset file"),
    result_path: Path = typer.Argument(help="Calibration result file"),
    init_path: Optional[Path] = typer.Option(
        None, "--init", "-i", help="Initial joint angles (defaults to dataset angles)"
    ),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Result file"),
):
    """Re-estimate joint angles with the calibrated chain held fixed."""
    state = _state(ctx)
    with _reported_errors():
        dataset = load_dataset(dataset_path)
        calibration = load_result(result_path)
        init_angles = None
        if init_path is not None:
            _, init_angles = load_init(init_path)
        if init_angles is None and dataset.has_known_angles:
            init_angles = [s.known_angles for s in dataset.sets]
        if init_angles is None:
            raise ConfigError(
                "validate needs initial joint angles from --init or the dataset"
            )
        estimator = create_registry().create(
            "validate",
            dataset,
            state.run.solver,
            workers=state.workers,
            min_sets=state.run.min_sets,
            force=state.run.force,
        )
        result = estimator.calibrate(calibration.estimate.model, init_angles)
        _write_result(state.resolve_out(out, "validation.yaml"), "validation", result)
        _exit_unless_converged(result)


@app.command()
def track(
    ctx: typer.Context,
    sequence_path: Path = typer.Argument(help="Tracker sequence file"),
    result_path: Optional[Path] = typer.Option(
        None, "--result", "-r", help="Calibration result file"
    ),
    model_path: Optional[Path] = typer.Option(
        None, "--model", help="Model file (init-file format) instead of a result"
    ),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory"),
):
    """Track body pose and joint angles frame by frame."""
    state = _state(ctx)
    with _reported_errors():
        if (result_path is None) == (model_path is None):
            raise ConfigError("track needs exactly one of --result and --model")
        if result_path is not None:
            model = load_result(result_path).estimate.model
        else:
            model, _ = load_init(model_path)
        sequence = load_sequence(sequence_path)
        rig = RigExtrinsics(
            model=model,
            intrinsics_s=sequence.intrinsics_s,
            intrinsics_d=sequence.intrinsics_d,
            T_s_I=sequence.T_s_I,
        )
        estimates, report = track_sequence(
            rig, sequence.frames, sequence.initial, state.run.solver
        )
        out_dir = state.resolve_out(out, "track")
        write_track_csv(
            out_dir / "track.csv", [f.timestamp for f in sequence.frames], estimates
        )
        summary = format_track_summary(report)
        atomic_write_text(out_dir / "track_summary.txt", summary)
    console.print(summary, end="")
    console.print(f"[green]Estimates written: {out_dir / 'track.csv'}[/green]")


@app.command()
def report(
    study_dir: Path = typer.Argument(help="Directory written by 'dccal study'"),
):
    """Rebuild the reprojection, joint and parameter tables of a study."""
    with _reported_errors():
        paths = generate_report(study_dir)
    for path in paths:
        console.print(f"[green]Wrote {path}[/green]")


@app.command()
def study(
    ctx: typer.Context,
    calibration_config: Optional[Path] = typer.Option(
        None, "--calibration-config", help="Calibration simulation config"
    ),
    validation_config: Optional[Path] = typer.Option(
        None, "--validation-config", help="Validation simulation config"
    ),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Study directory"),
    raw_parameters: bool = typer.Option(
        False, "--raw", help="Compare parameters without gauge alignment"
    ),
):
    """Simulate, calibrate, validate and tabulate in one run."""
    state = _state(ctx)
    run = state.run
    with _reported_errors():
        config_cal = state.seeded(
            _load_config(
                SimulationConfig, calibration_config, SimulationConfig.create_default()
            )
        )
        config_val = state.seeded(
            _load_config(
                SimulationConfig,
                validation_config,
                SimulationConfig.create_default_validation(),
            ),
            offset=1,
        )
        outcome = run_sim_study(
            config_cal,
            config_val,
            run.solver,
            workers=state.workers,
            min_sets=run.min_sets,
            force=run.force,
            min_common_points=run.min_common_points,
            pnp_max_rms_px=run.pnp_max_rms_px,
            use_true_points=run.use_true_points,
            align_gauge=not raw_parameters,
        )
        study_dir = state.resolve_out(out, "study")
        for name, bundle, result in (
            ("calibration", outcome.calibration_bundle, outcome.calibration),
            ("validation", outcome.validation_bundle, outcome.validation),
        ):
            _write_bundle(study_dir / name, bundle)
            save_result(study_dir / name / "result.yaml", result)
        write_study_tables(
            study_dir,
            outcome.calibration,
            outcome.validation,
            outcome.calibration_truth,
            outcome.validation_truth,
        )
    _print_reprojection("Reprojection error", outcome.reprojection_rows())
    joints = Table(title="Joint angle error")
    joints.add_column("Joint", style="cyan")
    joints.add_column("Mean (rad)", justify="right")
    joints.add_column("Std (rad)", justify="right")
    for name, mean, std in outcome.joint_rows():
        joints.add_row(name, f"{mean:.3e}", f"{std:.3e}")
    console.print(joints)
    params = Table(title="Parameter error")
    params.add_column("Class", style="cyan")
    params.add_column("Mean", justify="right")
    params.add_column("Std", justify="right")
    params.add_column("Unit")
    for name, mean, std, unit in outcome.parameter_rows():
        params.add_row(name, f"{mean:.3e}", f"{std:.3e}", unit)
    console.print(params)
    console.print(f"[green]Study written: {study_dir}[/green]")
    with _reported_errors():
        for result in (outcome.calibration, outcome.validation):
            _exit_unless_converged(result)


@app.command()
def evaluate(
    ctx: typer.Context,
    result_path: Path = typer.Argument(help="Calibration or validation result"),
    truth_path: Path = typer.Argument(help="Truth sidecar written by simulate"),
    raw_parameters: bool = typer.Option(
        False, "--raw", help="Compare parameters without gauge alignment"
    ),
):
    """Compare a result against the simulation ground truth."""
    with _reported_errors():
        result = load_result(result_path)
        truth = load_truth(truth_path)
        errors = evaluate_against_truth(
            result, truth.truth_model, truth.truth_angles, not raw_parameters
        )
    table = Table(title="Error against ground truth")
    table.add_column("Quantity", style="cyan")
    table.add_column("Mean", justify="right")
    table.add_column("Std", justify="right")
    for index, (mean, std) in enumerate(
        zip(errors.joint_mean_rad, errors.joint_std_rad)
    ):
        table.add_row(f"joint_{index + 1} (rad)", f"{mean:.3e}", f"{std:.3e}")
    table.add_row(
        "translation (m)",
        f"{errors.translation_mean_m:.3e}",
        f"{errors.translation_std_m:.3e}",
    )
    table.add_row(
        "rotation (rad)",
        f"{errors.rotation_mean_rad:.3e}",
        f"{errors.rotation_std_rad:.3e}",
    )
    console.print(table)
    console.print(
        f"chain: rotation <= {errors.chain_rotation_max_rad:.3e} rad, "
        f"translation <= {errors.chain_translation_max_m:.3e} m"
    )


@app.command()
def simulate_track(
    ctx: typer.Context,
    config_path: Optional[Path] = typer.Option(
        None, "--sequence-config", "-s", help="Sequence configuration file"
    ),
    out: Optional[Path] = typer.Option(None, "--out", "-o", help="Output directory"),
):
    """Synthesize a tracker sequence and the true chain as a model file."""
    state = _state(ctx)
    with _reported_errors():
        config = _load_config(SequenceConfig, config_path, SequenceConfig())
        if state.run.seed is not None:
            config = config.model_copy(update={"rng_seed": state.run.seed})
        bundle = simulate_sequence(config)
        out_dir = state.resolve_out(out, "sequence")
        rig = bundle.rig
        save_sequence(
            out_dir / "sequence.yaml",
            rig.intrinsics_s,
            rig.intrinsics_d,
            rig.T_s_I,
            bundle.frames,
            bundle.initial,
        )
        save_init(out_dir / "model.yaml", rig.model)
    console.print(
        f"[green]Sequence written: {out_dir / 'sequence.yaml'} "
        f"({len(bundle.frames)} frames)[/green]"
    )


@app.command()
def init_config(
    output: Path = typer.Option(
        Path("config.yaml"), "--output", "-o", help="Output configuration file"
    ),
    kind: str = typer.Option(
        "calibration",
        "--kind",
        "-k",
        help="calibration, validation, sequence or run",
    ),
    force: bool = typer.Option(
        False, "--force", "-f", help="Overwrite existing configuration"
    ),
):
    """Write a default configuration file."""
    if kind not in CONFIG_KINDS:
        err_console.print(f"Unknown config kind: {kind}", style="red", markup=False)
        raise typer.Exit(1)
    if output.exists() and not force:
        err_console.print(
            f"Configuration file already exists: {output}", style="red", markup=False
        )
        err_console.print("Use --force to overwrite")
        raise typer.Exit(1)

    defaults = {
        "calibration": SimulationConfig.create_default,
        "validation": SimulationConfig.create_default_validation,
        "sequence": SequenceConfig,
        "run": RunConfig,
    }
    defaults[kind]().save_to_file(output)
    console.print(f"[green]Configuration file created: {output}[/green]")


@app.command()
def version():
    """Show version information."""
    from . import __version__

    console.print(f"dccal version {__version__}")


def main():
    """Main entry point."""
    app()


if __name__ == "__main__":
    main()
