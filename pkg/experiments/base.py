"""
Base experiment interface.
Every CLI experiment implements this interface; the registry maps experiment
names to instances.
"""

import time
from abc import ABC, abstractmethod
from pathlib import Path
from typing import Any, Dict, List, Optional

from pydantic import BaseModel, ConfigDict, Field

from experiments.results import ResultTable, config_digest, run_metadata
from models.schemas import ExperimentConfig
from utils.config import get_settings
from utils.errors import ConfigError, UnsupportedError
from utils.logging import get_logger, log_metric, log_trace

logger = get_logger()

EXIT_OK = 0
EXIT_USAGE = 2
EXIT_NUMERIC = 3


class ExperimentMetadata(BaseModel):
    """Metadata for an experiment."""
    name: str = Field(..., description="Experiment name, also the CLI subcommand")
    description: str = Field(..., description="One-line description")
    version: str = Field(default="1.0.0", description="Experiment version")
    columns: List[str] = Field(default_factory=list, description="Result table columns")
    uses_trajectories: bool = Field(default=False, description="Whether the run is Monte-Carlo")


class ExperimentResult(BaseModel):
    """Result from an experiment run."""
    model_config = ConfigDict(arbitrary_types_allowed=True)

    success: bool = Field(..., description="Whether the experiment completed")
    table: Optional[Any] = Field(None, description="Result table (ResultTable)")
    path: Optional[str] = Field(None, description="Where the table was written")
    error: Optional[str] = Field(None, description="Error message if failed")
    diagnostics: List[str] = Field(default_factory=list, description="Config diagnostics if rejected")
    exit_code: int = Field(default=EXIT_OK, description="Process exit code for the CLI")
    execution_time_ms: Optional[int] = Field(None, description="Execution time in milliseconds")


class BaseExperiment(ABC):
    """
    Base class for all experiments.

    Subclasses implement:
    - get_metadata(): name, description and columns
    - _execute(): build the result table
    - _check(): experiment-specific config diagnostics (optional)
    """

    def __init__(self):
        self.metadata = self.get_metadata()
        logger.debug(f"Initialized experiment: {self.metadata.name} v{self.metadata.version}")

    @abstractmethod
    def get_metadata(self) -> ExperimentMetadata:
        pass

    @abstractmethod
    def _execute(self, config: ExperimentConfig, threads: int) -> ResultTable:
        pass

    def _check(self, config: ExperimentConfig) -> List[str]:
        return []

    def uses_trajectories(self, config: ExperimentConfig) -> bool:
        return self.metadata.uses_trajectories

    def validate(self, config: ExperimentConfig) -> List[str]:
        """Diagnostics for a config this experiment cannot run; empty when it is runnable."""
        diagnostics = []
        if config.experiment.value != self.metadata.name:
            diagnostics.append(f"experiment: '{config.experiment.value}' given to the '{self.metadata.name}' runner")
        if self.uses_trajectories(config) and config.trajectory.seed is None:
            diagnostics.append("trajectory.seed: required for trajectory experiments")
        return diagnostics + self._check(config)

    def batch_size(self, config: ExperimentConfig) -> int:
        return config.trajectory.batch_size or get_settings().batch_size

    def output_path(self, config: ExperimentConfig, out: Optional[str] = None) -> Path:
        if out:
            return Path(out)
        if config.output.path:
            return Path(config.output.path)
        return Path(get_settings().results_dir) / f"{self.metadata.name}.csv"

    def execute(
        self, config: ExperimentConfig, out: Optional[str] = None, threads: Optional[int] = None
    ) -> ExperimentResult:
        """
        Validate, run and write the result table.

        Config problems give exit code 2, numerical failures exit code 3.
        """
        start_time = time.time()
        threads = max(1, threads or get_settings().threads)
        trace_id = config_digest(config)[:16]

        try:
            diagnostics = self.validate(config)
            if diagnostics:
                raise ConfigError(diagnostics)
            logger.info(f"Running experiment: {self.metadata.name} (threads={threads})")

            table = self._execute(config, threads)
            table.metadata = {**run_metadata(config, self.batch_size(config)), **table.metadata}
            path = table.write(self.output_path(config, out))

            execution_time_ms = int((time.time() - start_time) * 1000)
            log_metric(
                metric_name=f"experiment_{self.metadata.name}_execution_time",
                metric_value=execution_time_ms,
                metric_unit="ms",
                tags={"rows": str(len(table.rows))},
            )
            log_trace(trace_id, self.metadata.name, execution_time_ms, rows=len(table.rows))
            logger.info(f"Experiment {self.metadata.name} wrote {len(table.rows)} rows to {path}")
            return ExperimentResult(
                success=True, table=table, path=str(path), execution_time_ms=execution_time_ms
            )

        except (ConfigError, UnsupportedError) as e:
            diagnostics = getattr(e, "diagnostics", [str(e)])
            logger.error(f"Experiment {self.metadata.name} rejected its config: {e}")
            log_trace(trace_id, self.metadata.name, int((time.time() - start_time) * 1000), status="error")
            return ExperimentResult(
                success=False,
                error=f"{type(e).__name__}: {e}",
                diagnostics=diagnostics,
                exit_code=EXIT_USAGE,
                execution_time_ms=int((time.time() - start_time) * 1000),
            )
        except Exception as e:
            logger.error(f"Experiment {self.metadata.name} failed: {type(e).__name__}: {e}")
            log_trace(trace_id, self.metadata.name, int((time.time() - start_time) * 1000), status="error")
            return ExperimentResult(
                success=False,
                error=f"{type(e).__name__}: {e}",
                exit_code=EXIT_NUMERIC,
                execution_time_ms=int((time.time() - start_time) * 1000),
            )

    def get_description(self) -> str:
        return f"{self.metadata.name} (v{self.metadata.version}): {self.metadata.description}"


class ExperimentRegistry:
    """Registry of the available experiments."""

    def __init__(self):
        self._experiments: Dict[str, BaseExperiment] = {}

    def register(self, experiment: BaseExperiment) -> None:
        self._experiments[experiment.metadata.name] = experiment
        logger.debug(f"Registered experiment: {experiment.metadata.name}")

    def get_experiment(self, name: str) -> Optional[BaseExperiment]:
        return self._experiments.get(name)

    def list_experiments(self) -> List[str]:
        return list(self._experiments.keys())

    def get_all_metadata(self) -> List[ExperimentMetadata]:
        return [experiment.metadata for experiment in self._experiments.values()]


# Global experiment registry
_global_registry: Optional[ExperimentRegistry] = None


def get_experiment_registry() -> ExperimentRegistry:
    """Get the global experiment registry (singleton), populated on first use."""
    global _global_registry
    if _global_registry is None:
        from experiments.runners import default_experiments

        _global_registry = ExperimentRegistry()
        for experiment in default_experiments():
            _global_registry.register(experiment)
    return _global_registry


def _lookup(config: ExperimentConfig) -> BaseExperiment:
    experiment = get_experiment_registry().get_experiment(config.experiment.value)
    if experiment is None:
        raise ConfigError([f"experiment: unknown experiment '{config.experiment.value}'"])
    return experiment


def validate(config: ExperimentConfig) -> List[str]:
    """Diagnostics for config; empty when it can be run."""
    return _lookup(config).validate(config)


def run(config: ExperimentConfig, out: Optional[str] = None, threads: Optional[int] = None) -> ExperimentResult:
    """Run the experiment a config describes and write its table."""
    return _lookup(config).execute(config, out=out, threads=threads)
