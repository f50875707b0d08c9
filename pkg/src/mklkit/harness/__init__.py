"""Experiment harness: one-vs-one reduction, metrics, experiment drivers and the CLI."""
from .config import ExperimentConfig, load_config, parse_overrides
from .experiments import (run_c_sensitivity, run_kernel_count_sweep, run_redundancy_experiment,
                          stratified_split)
from .metrics import MetricsReport, accuracy, confusion_matrix, emit_confusion
from .multiclass import METHODS, OvoModel, fit_binary, ovo_fit, ovo_predict

__all__ = [
    "ExperimentConfig", "load_config", "parse_overrides",
    "run_c_sensitivity", "run_kernel_count_sweep", "run_redundancy_experiment", "stratified_split",
    "MetricsReport", "accuracy", "confusion_matrix", "emit_confusion",
    "METHODS", "OvoModel", "fit_binary", "ovo_fit", "ovo_predict",
]
