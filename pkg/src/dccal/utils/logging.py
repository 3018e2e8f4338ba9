"""Logging configuration for dccal.

Records go to standard error so that command output on standard output stays
machine-readable. Solver events carry numpy scalars and arrays; they are turned
into builtins before rendering so the JSON renderer can serialize them.
"""

import logging
import sys
from typing import Any, MutableMapping

import numpy as np
import structlog
from rich.console import Console
from rich.logging import RichHandler


def numpy_to_builtin(
    logger: Any, method_name: str, event_dict: MutableMapping[str, Any]
) -> MutableMapping[str, Any]:
    """Processor: numpy arrays become lists, numpy scalars become Python numbers."""
    for key, value in event_dict.items():
        if isinstance(value, np.ndarray):
            event_dict[key] = value.tolist()
        elif isinstance(value, np.generic):
            event_dict[key] = value.item()
    return event_dict


def _handler(json_logs: bool) -> logging.Handler:
    if json_logs:
        return logging.StreamHandler(sys.stderr)
    return RichHandler(console=Console(stderr=True), rich_tracebacks=True)


def setup_logging(level: str = "INFO", json_logs: bool = False) -> None:
    """Set up structured logging for dccal; safe to call again with new settings."""

    logging.basicConfig(
        level=getattr(logging, level.upper()),
        format="%(message)s",
        datefmt="[%X]",
        handlers=[_handler(json_logs)],
        force=True,
    )

    processors = [
        structlog.stdlib.filter_by_level,
        structlog.stdlib.add_logger_name,
        structlog.stdlib.add_log_level,
        structlog.stdlib.PositionalArgumentsFormatter(),
        structlog.processors.TimeStamper(fmt="iso"),
        structlog.processors.StackInfoRenderer(),
        structlog.processors.format_exc_info,
        structlog.processors.UnicodeDecoder(),
        numpy_to_builtin,
    ]

    if json_logs:
        processors.append(structlog.processors.JSONRenderer())
    else:
        processors.append(structlog.dev.ConsoleRenderer())

    # Module loggers are created at import time; re-resolve them on every call.
    structlog.configure(
        processors=processors,
        context_class=dict,
        logger_factory=structlog.stdlib.LoggerFactory(),
        wrapper_class=structlog.stdlib.BoundLogger,
        cache_logger_on_first_use=False,
    )
