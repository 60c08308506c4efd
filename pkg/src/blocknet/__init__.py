"""Capacity allocation for stochastic loss networks via calibrated blocking surrogates."""
from .model import ClassSpec, NetworkSpec, SharedSource, StationSpec, objective_value, round_capacity, validate
from .optimizers import OptimizationTrace, OptimizerConfig, optimize, run_coupled, run_decoupled, run_sa
from .simulator import BlockingEstimates, CISchedule, SimConfig, simulate_blocking
from .stochastics import ArrivalProcessSpec, DistributionSpec

__all__ = [
    "ArrivalProcessSpec", "BlockingEstimates", "CISchedule", "ClassSpec", "DistributionSpec",
    "NetworkSpec", "OptimizationTrace", "OptimizerConfig", "SharedSource", "SimConfig", "StationSpec",
    "objective_value", "optimize", "round_capacity", "run_coupled", "run_decoupled", "run_sa",
    "simulate_blocking", "validate",
]
