"""Scenario library, YAML configs, experiment runner and CLI."""
from .config import load_scenario, save_scenario
from .experiment import RunResult, emit_plot_data, fingerprint, k_sweep, run_experiment
from .scenarios import ScenarioSpec, build_scenario

__all__ = ["RunResult", "ScenarioSpec", "build_scenario", "emit_plot_data", "fingerprint", "k_sweep",
           "load_scenario", "run_experiment", "save_scenario"]
