"""
Experiment runner: config files in, CSV result tables out.
"""

from experiments.base import get_experiment_registry, run, validate
from experiments.config_file import load_config, parse_config_text
from experiments.results import ResultTable

__all__ = ["get_experiment_registry", "load_config", "parse_config_text", "ResultTable", "run", "validate"]
