"""Experiment harness: config, commands, CLI, self-test."""

from .commands import (
    cmd_communication,
    cmd_concentration,
    cmd_inefficiency,
    cmd_spectrum,
    find_min_budget,
)
from .config import ExperimentConfig, load_config, parse_config_file, with_updates
from .spotcheck import brute_force_log2_spectrum, run_selftest, spot_check_outputs

__all__ = [
    "ExperimentConfig",
    "brute_force_log2_spectrum",
    "cmd_communication",
    "cmd_concentration",
    "cmd_inefficiency",
    "cmd_spectrum",
    "find_min_budget",
    "load_config",
    "parse_config_file",
    "run_selftest",
    "spot_check_outputs",
    "with_updates",
]
