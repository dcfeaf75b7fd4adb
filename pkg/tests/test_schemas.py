"""
Tests for the pydantic schemas shared by the physics and experiment layers.
"""

import numpy as np
import pytest
from pydantic import ValidationError

from models.schemas import (
    ClickSummary,
    ExperimentConfig,
    ExperimentKind,
    PulseFamily,
    PulseSpec,
    QuadratureConfig,
    SweepSection,
    TimeGrid,
    TrajectorySection,
)


class TestTimeGrid:
    """Test uniform time grids."""

    def test_times(self):
        """Test spacing and end points."""
        grid = TimeGrid(t_start=-1.0, t_end=1.0, n_points=5)
        assert grid.dt == pytest.approx(0.5)
        assert grid.n_steps == 4
        np.testing.assert_allclose(grid.times(), [-1.0, -0.5, 0.0, 0.5, 1.0])

    def test_from_step(self):
        """Test that the step is kept exactly and the end is covered."""
        grid = TimeGrid.from_step(0.0, 1.05, 0.1)
        assert grid.dt == pytest.approx(0.1)
        assert grid.t_end >= 1.05

    def test_invalid(self):
        """Test empty and single-point grids."""
        with pytest.raises(ValidationError):
            TimeGrid(t_start=1.0, t_end=1.0, n_points=3)
        with pytest.raises(ValidationError):
            TimeGrid(t_start=0.0, t_end=1.0, n_points=1)


class TestQuadratureConfig:
    """Test quadrature tolerances."""

    def test_scaled(self):
        """Test tightening both tolerances."""
        cfg = QuadratureConfig(abs_tol=1e-8, rel_tol=1e-6).scaled(0.1)
        assert cfg.abs_tol == pytest.approx(1e-9)
        assert cfg.rel_tol == pytest.approx(1e-7)

    def test_needs_a_tolerance(self):
        """Test that at least one tolerance is positive."""
        with pytest.raises(ValidationError):
            QuadratureConfig(abs_tol=0.0, rel_tol=0.0)


class TestPulseSpec:
    """Test declarative input states."""

    def test_defaults(self):
        """Test a single resonant photon of unit width."""
        spec = PulseSpec()
        assert spec.family == PulseFamily.GAUSSIAN_FOCK
        assert spec.centers() == (0.0,)

    def test_window(self):
        """Test padding by max(delta, 1/gamma)."""
        spec = PulseSpec(family=PulseFamily.SEPARATED_GAUSSIANS, n_photons=2, delta=0.5, separation=4.0)
        assert spec.window(1.0, widths=2.0) == pytest.approx((2.0, 10.0))
        assert spec.window(0.25, widths=1.0) == pytest.approx((0.0, 12.0))

    def test_sign(self):
        """Test the bunched and anti-bunched signs, also from text."""
        assert PulseSpec.model_validate({"sign": "-1"}).sign == -1
        with pytest.raises(ValidationError):
            PulseSpec(sign=0)

    def test_hashable(self, fock2):
        """Test that specs can key caches."""
        assert hash(fock2) == hash(PulseSpec(n_photons=2, delta=1.0))

    def test_invalid_width(self):
        """Test that widths must be positive."""
        with pytest.raises(ValidationError):
            PulseSpec(delta=0.0)


class TestClickSummary:
    """Test consistency checks of click summaries."""

    def test_consistent(self):
        """Test a valid summary."""
        summary = ClickSummary(
            subtraction_clicks=frozenset({1, 2}), final_detector_click=False, inferred_count=2, true_count=3, error=-1
        )
        assert summary.error == -1

    def test_inconsistent(self):
        """Test that counts must match the clicking detectors."""
        with pytest.raises(ValidationError):
            ClickSummary(
                subtraction_clicks=frozenset({1}), final_detector_click=True, inferred_count=1, true_count=1, error=0
            )


class TestExperimentConfig:
    """Test experiment config sections."""

    def test_fallbacks(self):
        """Test that empty sweeps fall back to the pulse and detector values."""
        config = ExperimentConfig(experiment=ExperimentKind.LINEAR, pulse=PulseSpec(n_photons=3, separation=2.0))
        assert config.photon_numbers() == [3]
        assert config.emitter_counts() == [1]
        assert config.separations() == [2.0]

    def test_sweep_validation(self):
        """Test that delta*gamma values are positive and present."""
        with pytest.raises(ValidationError):
            SweepSection(delta_gamma=[])
        with pytest.raises(ValidationError):
            SweepSection(delta_gamma=[1.0, -2.0])

    def test_seed_range(self):
        """Test unsigned 64-bit seeds."""
        assert TrajectorySection(seed=2**64 - 1).seed == 2**64 - 1
        with pytest.raises(ValidationError):
            TrajectorySection(seed=2**64)
