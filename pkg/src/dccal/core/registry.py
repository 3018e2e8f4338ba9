"""Calibration estimator registry."""

from typing import Any, Dict, List, Optional, Type

import structlog

from ..estimators.base import BaseCalibrator
from .errors import ConfigError

logger = structlog.get_logger(__name__)


class EstimatorRegistry:
    """Registry mapping calibration mode names to estimator classes."""

    def __init__(self):
        self.estimator_classes: Dict[str, Type[BaseCalibrator]] = {}

    def register_estimator_class(
        self, name: str, estimator_class: Type[BaseCalibrator]
    ) -> None:
        """Register an estimator class."""
        if name in self.estimator_classes:
            logger.warning("Replacing registered estimator", estimator=name)
        self.estimator_classes[name] = estimator_class
        logger.debug("Registered estimator class", estimator=name)

    def get_estimator_class(self, name: str) -> Optional[Type[BaseCalibrator]]:
        return self.estimator_classes.get(name)

    def create(self, name: str, *args: Any, **kwargs: Any) -> BaseCalibrator:
        """Instantiate a registered estimator.

        Raises:
            ConfigError: no estimator registered under name.
        """
        estimator_class = self.get_estimator_class(name)
        if estimator_class is None:
            logger.error("Estimator class not registered", estimator=name)
            raise ConfigError(
                f"Unknown calibration mode '{name}'; "
                f"available: {', '.join(self.list_available_estimators())}"
            )
        return estimator_class(*args, **kwargs)

    def list_available_estimators(self) -> List[str]:
        """List all available estimator names."""
        return list(self.estimator_classes.keys())
