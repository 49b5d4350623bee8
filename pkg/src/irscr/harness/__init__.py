"""Experiment orchestration, benchmarks, oracles and result emission."""

from .benchmarks import benchmark_noirs, benchmark_prephase, benchmark_randphase
from .config import ExperimentConfig, config_from_dict, load_config
from .emit import emit_results, load_solution_file, solution_file_dict
from .oracles import certify_solution, monte_carlo_outage, worst_case_sample_it
from .runner import (
    ExperimentResult,
    RealizationRecord,
    build_scenario,
    run_experiment,
    summarize,
)

__all__ = [
    "ExperimentConfig",
    "ExperimentResult",
    "RealizationRecord",
    "benchmark_noirs",
    "benchmark_prephase",
    "benchmark_randphase",
    "build_scenario",
    "certify_solution",
    "config_from_dict",
    "emit_results",
    "load_config",
    "load_solution_file",
    "monte_carlo_outage",
    "run_experiment",
    "solution_file_dict",
    "summarize",
    "worst_case_sample_it",
]
