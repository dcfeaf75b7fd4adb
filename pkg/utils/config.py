"""
Configuration management using Pydantic Settings.
Loads runtime defaults from the environment (prefix PNRSIM_) and an optional .env file.
Experiment parameters live in experiment config files, not here.
"""

from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field
from typing import Optional
from pathlib import Path


class Settings(BaseSettings):
    """Runtime settings loaded from environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="PNRSIM_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Logging Configuration
    log_level: str = Field(
        default="INFO",
        description="Logging level (DEBUG, INFO, WARNING, ERROR, CRITICAL)"
    )
    log_format: str = Field(
        default="text",
        description="Log format for file sinks (json or text)"
    )
    log_dir: str = Field(
        default="logs",
        description="Directory for rotating log files"
    )
    log_to_file: bool = Field(
        default=False,
        description="Also write rotating log files under log_dir"
    )

    # Quadrature Configuration
    quad_abs_tol: float = Field(
        default=1e-10,
        description="Default absolute tolerance of adaptive quadrature"
    )
    quad_rel_tol: float = Field(
        default=1e-8,
        description="Default relative tolerance of adaptive quadrature"
    )
    quad_max_subdivisions: int = Field(
        default=2000,
        description="Maximum number of interval/region subdivisions"
    )
    simplex_max_dim: int = Field(
        default=4,
        description="Largest number of ordered integration variables"
    )
    window_widths: float = Field(
        default=8.0,
        description="Integration windows extend this many max(delta, 1/gamma) beyond pulse centers"
    )

    # Trajectory Configuration
    trajectory_dt_max: float = Field(
        default=0.01,
        description="Largest RK4 step in units of 1/gamma (also capped at delta/200)"
    )
    bisection_depth: int = Field(
        default=6,
        description="Jump-time bisection halvings (6 gives dt/64 resolution)"
    )
    max_norm_drop: float = Field(
        default=0.1,
        description="Largest relative norm^2 drop tolerated within one step"
    )
    batch_size: int = Field(
        default=256,
        description="Trajectories propagated together as one state matrix"
    )
    trace_stride: int = Field(
        default=100,
        description="Record the survival probability every this many steps"
    )
    min_g2_trajectories: int = Field(
        default=100,
        description="Minimum post-selected trajectories for a binned G2 estimate"
    )
    show_progress: bool = Field(
        default=True,
        description="Show tqdm progress bars for ensembles"
    )

    # Network Configuration
    kappa_max: float = Field(
        default=50.0,
        description="Clip of the shaped-cavity decay rate, in units of gamma"
    )
    release_tail: float = Field(
        default=1e-6,
        description="Release window ends when the unreleased pulse fraction drops below this"
    )
    hilbert_dim_cap: int = Field(
        default=20000,
        description="Largest composed Hilbert-space dimension"
    )

    # Execution Configuration
    threads: int = Field(
        default=1,
        description="Worker threads for ensembles and correlator grids"
    )
    results_dir: str = Field(
        default="results",
        description="Default directory for experiment outputs"
    )
    correlator_cache_size: int = Field(
        default=65536,
        description="Entries kept in the correlator value cache"
    )

    def ensure_directories(self) -> None:
        """Ensure output directories exist."""
        directories = [self.results_dir]
        if self.log_to_file:
            directories.append(self.log_dir)

        for directory in directories:
            Path(directory).mkdir(parents=True, exist_ok=True)

    def dt_for(self, delta: float, gamma: float = 1.0) -> float:
        """Trajectory step for a pulse of width delta: min(dt_max/gamma, delta/200)."""
        coarse = self.trajectory_dt_max / gamma if gamma > 0 else self.trajectory_dt_max
        return min(coarse, delta / 200.0)


# Global settings instance
_settings: Optional[Settings] = None


def get_settings() -> Settings:
    """Get the global settings instance (singleton pattern)."""
    global _settings
    if _settings is None:
        _settings = Settings()
    return _settings


def reload_settings() -> Settings:
    """Reload settings from environment variables."""
    global _settings
    _settings = Settings()
    return _settings
