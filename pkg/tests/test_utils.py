"""
Tests for settings, structured logging and the error hierarchy.
"""

import pytest
from loguru import logger

import utils.config
from utils.config import get_settings, reload_settings
from utils.errors import ConfigError, DomainError, PNRSimError, UnsupportedSourceError
from utils.logging import log_event, log_metric, log_trace


@pytest.fixture
def messages():
    """Capture loguru messages at DEBUG level."""
    captured = []
    handler = logger.add(lambda message: captured.append(message.record["message"]), level="DEBUG", format="{message}")
    yield captured
    logger.remove(handler)


class TestSettings:
    """Test environment-driven settings."""

    def test_reload_reads_environment(self, monkeypatch):
        """Test that PNRSIM_ variables override the defaults."""
        monkeypatch.setattr(utils.config, "_settings", get_settings())
        monkeypatch.setenv("PNRSIM_BATCH_SIZE", "64")
        monkeypatch.setenv("PNRSIM_MAX_NORM_DROP", "0.05")
        settings = reload_settings()
        assert settings.batch_size == 64
        assert settings.max_norm_drop == pytest.approx(0.05)
        assert get_settings() is settings

    def test_step_rule(self):
        """Test dt = min(dt_max / gamma, delta / 200)."""
        settings = get_settings()
        assert settings.dt_for(10.0) == pytest.approx(settings.trajectory_dt_max)
        assert settings.dt_for(0.2) == pytest.approx(0.001)
        assert settings.dt_for(10.0, gamma=4.0) == pytest.approx(settings.trajectory_dt_max / 4.0)

    def test_ensure_directories(self, tmp_path, monkeypatch):
        """Test that the results directory is created."""
        settings = get_settings()
        monkeypatch.setattr(settings, "results_dir", str(tmp_path / "out"))
        monkeypatch.setattr(settings, "log_to_file", False)
        settings.ensure_directories()
        assert (tmp_path / "out").is_dir()


class TestLogging:
    """Test the structured logging helpers."""

    def test_trace(self, messages):
        """Test the span line of a run."""
        log_trace("abc123", "outcomes", 12, status="error")
        assert messages == ["TRACE: outcomes [abc123] - 12ms (error)"]

    def test_event_and_metric(self, messages):
        """Test event and metric lines."""
        log_event("ensemble_finished", {"trajectories": 4})
        log_metric("trajectories_per_second", 2.5, "1/s")
        assert messages == ["EVENT: ensemble_finished", "METRIC: trajectories_per_second=2.51/s"]


class TestErrors:
    """Test the error hierarchy."""

    def test_builtin_bases(self):
        """Test that library errors are also the matching builtin errors."""
        assert issubclass(DomainError, ValueError)
        assert issubclass(UnsupportedSourceError, PNRSimError)

    def test_config_error_keeps_diagnostics(self):
        """Test that every diagnostic line is kept."""
        error = ConfigError(["line 1: pulse.delta: must be positive", "line 4: unknown key 'x'"])
        assert error.diagnostics == ["line 1: pulse.delta: must be positive", "line 4: unknown key 'x'"]
        assert "line 4" in str(error)
