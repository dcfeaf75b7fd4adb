"""
Test configuration and fixtures for the test suite.
"""

import pytest
from loguru import logger

from models.schemas import PulseFamily, PulseSpec, QuadratureConfig
from utils.config import get_settings


@pytest.fixture(scope="session", autouse=True)
def test_settings():
    """Quiet settings shared by every test."""
    settings = get_settings()
    settings.log_level = "ERROR"
    settings.show_progress = False
    settings.threads = 1
    logger.remove()
    return settings


@pytest.fixture
def quad():
    """Tolerances that keep exact-model integrals fast."""
    return QuadratureConfig(abs_tol=1e-9, rel_tol=1e-7, max_subdivisions=4000)


@pytest.fixture
def fock2():
    """Two photons in one Gaussian mode, delta*gamma = 1."""
    return PulseSpec(family=PulseFamily.GAUSSIAN_FOCK, n_photons=2, delta=1.0)


@pytest.fixture
def fock3():
    """Three photons in one Gaussian mode, delta*gamma = 1."""
    return PulseSpec(family=PulseFamily.GAUSSIAN_FOCK, n_photons=3, delta=1.0)


@pytest.fixture
def separated2():
    """Two well separated Gaussian photons."""
    return PulseSpec(family=PulseFamily.SEPARATED_GAUSSIANS, n_photons=2, delta=1.0, separation=20.0)


@pytest.fixture
def config_text():
    """A minimal valid linear config."""
    return (
        "# linear model\n"
        "experiment = linear\n"
        "detector.n_emitters = 2\n"
        "sweep.photons = 1, 2, 3\n"
        "sweep.delta_gamma = 1, 10\n"
    )
