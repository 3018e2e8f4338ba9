"""Test cases for logging setup."""

import json
import logging

import numpy as np
import structlog

from dccal.utils.logging import numpy_to_builtin, setup_logging


class TestNumpyProcessor:
    """Test conversion of numpy event values."""

    def test_arrays_and_scalars(self):
        event = {
            "event": "solved",
            "cost": np.float32(0.5),
            "iterations": np.int64(7),
            "x": np.array([1.0, 2.0]),
            "name": "tracker",
        }
        out = numpy_to_builtin(None, "info", event)
        assert out["cost"] == 0.5 and type(out["cost"]) is float
        assert out["iterations"] == 7 and type(out["iterations"]) is int
        assert out["x"] == [1.0, 2.0]
        assert out["name"] == "tracker"


class TestSetupLogging:
    """Test the stdlib and structlog configuration."""

    def test_json_logs_on_stderr(self, capsys):
        setup_logging("INFO", json_logs=True)
        structlog.get_logger("dccal.test").info(
            "solved", cost=np.float32(0.25), x=np.array([1.0, -1.0])
        )
        captured = capsys.readouterr()
        assert captured.out == ""
        record = json.loads(captured.err.strip().splitlines()[-1])
        assert record["event"] == "solved"
        assert record["cost"] == 0.25
        assert record["x"] == [1.0, -1.0]
        assert record["level"] == "info"

    def test_level_applies(self, capsys):
        setup_logging("WARNING", json_logs=True)
        structlog.get_logger("dccal.test").info("hidden")
        assert "hidden" not in capsys.readouterr().err
        assert logging.getLogger().level == logging.WARNING
        setup_logging("INFO")
