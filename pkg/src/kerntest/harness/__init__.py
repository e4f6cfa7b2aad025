"""CLI, data ingestion, experiment configuration and the seeded runner."""

from .config import ExperimentConfig, parse_config_file
from .experiments import report_json, run_experiment
from .generators import GENERATOR_NAMES, builtin_generator
from .io import load_dataset, read_csv_matrix

__all__ = [
    "ExperimentConfig",
    "parse_config_file",
    "run_experiment",
    "report_json",
    "builtin_generator",
    "GENERATOR_NAMES",
    "load_dataset",
    "read_csv_matrix",
]
