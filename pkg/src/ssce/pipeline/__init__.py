"""Experiment orchestration: configuration, training loops, gamma search and reporting."""

from .config import GAN_DEFAULTS, ConfigError, ExperimentConfig, load_config, parse_config
from .experiment import (
    EXIT_CONFIG, EXIT_DATA, EXIT_IO, EXIT_OK, EXIT_TRAINING, Experiment, ExperimentResult, StageError,
    load_classifier, load_generator, run_experiment, save_classifier, save_generator, stable_seed,
)
from .gamma import LedgerError, RunLedger, TrainingRecord, gamma_search, structure_label
from .report import COLUMNS, emit_report, report_rows, rows_to_csv
from .training import (
    ClassifierResult, Clock, GanConfig, GanResult, TrainingDivergedError, gradient_penalty, train_classifier,
    train_gan,
)

__all__ = [
    "COLUMNS", "EXIT_CONFIG", "EXIT_DATA", "EXIT_IO", "EXIT_OK", "EXIT_TRAINING", "GAN_DEFAULTS",
    "ClassifierResult", "Clock", "ConfigError", "Experiment", "ExperimentConfig", "ExperimentResult",
    "GanConfig", "GanResult", "LedgerError", "RunLedger", "StageError", "TrainingDivergedError",
    "TrainingRecord", "emit_report", "gamma_search", "gradient_penalty", "load_classifier", "load_config",
    "load_generator", "parse_config", "report_rows", "rows_to_csv", "run_experiment", "save_classifier",
    "save_generator", "stable_seed", "structure_label", "train_classifier", "train_gan",
]
