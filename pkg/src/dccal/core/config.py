"""Configuration management for dccal."""

from pathlib import Path
from typing import Any, Dict, Literal, Optional, Type, TypeVar

from pydantic import BaseModel, ConfigDict, Field, ValidationError

from ..utils.fileio import atomic_write_text, dump_yaml, load_yaml
from .errors import ConfigError

ModelT = TypeVar("ModelT", bound="YamlModel")


def describe_validation_error(source: Any, error: ValidationError) -> str:
    """One line per failing field: '<source>: <dotted.path>: <message>'."""
    lines = []
    for item in error.errors():
        location = ".".join(str(part) for part in item["loc"]) or "<root>"
        lines.append(f"{source}: {location}: {item['msg']}")
    return "\n".join(lines)


class YamlModel(BaseModel):
    """Pydantic model that round-trips through a YAML file."""

    @classmethod
    def from_dict(
        cls: Type[ModelT], data: Dict[str, Any], source: str = "<dict>"
    ) -> ModelT:
        try:
            return cls.model_validate(data)
        except ValidationError as e:
            raise ConfigError(describe_validation_error(source, e)) from e

    @classmethod
    def from_file(cls: Type[ModelT], config_path: Path) -> ModelT:
        """Load and validate a model from a YAML file."""
        return cls.from_dict(load_yaml(config_path), source=str(config_path))

    def to_yaml(self) -> str:
        return dump_yaml(self.model_dump(mode="json"))

    def save_to_file(self, config_path: Path) -> None:
        """Save the model to a YAML file atomically."""
        atomic_write_text(config_path, self.to_yaml())


class SolveOptions(YamlModel):
    """Levenberg-Marquardt options."""

    model_config = ConfigDict(extra="forbid")

    max_iterations: int = Field(default=200, gt=0, description="Iteration cap")
    cost_tolerance: float = Field(
        default=1e-10, gt=0, description="Stop when relative cost decrease drops below"
    )
    gradient_tolerance: float = Field(
        default=1e-10, gt=0, description="Stop when max |J^T r| drops below"
    )
    initial_damping: float = Field(default=1e-4, gt=0, description="Initial lambda")
    damping_up: float = Field(default=10.0, gt=1, description="Lambda growth factor")
    damping_down: float = Field(
        default=0.1, gt=0, lt=1, description="Lambda shrink factor"
    )
    loss: Literal["linear", "huber"] = Field(
        default="linear", description="Residual loss; huber is a tracker extension"
    )
    huber_width_px: float = Field(default=2.0, gt=0, description="Huber width, pixels")


class RunConfig(YamlModel):
    """Options shared by the command-line entry points."""

    model_config = ConfigDict(extra="forbid")

    solver: SolveOptions = Field(default_factory=SolveOptions)
    seed: Optional[int] = Field(default=None, description="Overrides config seeds")
    serial: bool = Field(default=False, description="Deterministic single-thread mode")
    workers: int = Field(default=4, gt=0, description="Residual evaluation threads")
    verbose: bool = Field(default=False, description="Debug logging")
    json_logs: bool = Field(default=False, description="Emit JSON log lines")
    min_sets: int = Field(
        default=10, gt=0, description="Minimum measurement sets for calibration"
    )
    force: bool = Field(
        default=False,
        description="Run below min_sets with a warning instead of failing",
    )
    min_common_points: int = Field(
        default=4, ge=4, description="Minimum target points seen by both cameras"
    )
    pnp_max_rms_px: float = Field(
        default=5.0, gt=0, description="PnP refinement RMS above which a solve fails"
    )
    use_true_points: bool = Field(
        default=False, description="Simulator: take 3D points from ground-truth poses"
    )

    @property
    def effective_workers(self) -> int:
        return 1 if self.serial else self.workers

    @property
    def log_level(self) -> str:
        return "DEBUG" if self.verbose else "INFO"
