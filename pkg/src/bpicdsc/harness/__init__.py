"""Experiment engine and command-line interface."""

from .sim import (ConfigError, SimConfig, SweepResult, SweepRow, pearson, run_ber_approx,
                  run_ber_sim, run_complexity, run_correlation, run_fer_sim, wilson_halfwidth)

__all__ = [
    "ConfigError", "SimConfig", "SweepResult", "SweepRow", "pearson", "run_ber_approx",
    "run_ber_sim", "run_complexity", "run_correlation", "run_fer_sim", "wilson_halfwidth",
]
