"""Experiment harness: configuration, runners, reports and the CLI."""
from .config import EXPERIMENTS, ConfigError, ExperimentConfig, config_from_mapping, default_config, load_config
from .experiments import (
    BE_FAMILY,
    run_be_check,
    run_compact_support_check,
    run_conservation_suite,
    run_experiment,
    run_hamiltonian_check,
    run_optimality_scan,
    run_smoothing_scan,
    run_stability_check,
    run_sweep,
    stability_factor,
)
from .report import Report, Verdict, emit_report

__all__ = [
    "BE_FAMILY",
    "EXPERIMENTS",
    "ConfigError",
    "ExperimentConfig",
    "Report",
    "Verdict",
    "config_from_mapping",
    "default_config",
    "emit_report",
    "load_config",
    "run_be_check",
    "run_compact_support_check",
    "run_conservation_suite",
    "run_experiment",
    "run_hamiltonian_check",
    "run_optimality_scan",
    "run_smoothing_scan",
    "run_stability_check",
    "run_sweep",
    "stability_factor",
]
