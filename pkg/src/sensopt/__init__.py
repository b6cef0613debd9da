"""Throughput-optimal spectrum sensing time for a cognitive-radio secondary user."""
from .detector import DetectorConfig, operating_point, pfa_constrained, tau_min
from .estimators import AdaptiveSensingTime, CostSurfaceRegressor, SensingTimeOptimizer
from .link_model import Fading, Scenario, reference_scenario, throughput, uniform_scenario
from .optimizer import InfeasibleError, max_throughput_L, optimize_tau, optimize_tau_tf

__version__ = "0.1.0"

__all__ = [
    "AdaptiveSensingTime", "CostSurfaceRegressor", "DetectorConfig", "Fading", "InfeasibleError",
    "Scenario", "SensingTimeOptimizer", "max_throughput_L", "operating_point", "optimize_tau",
    "optimize_tau_tf", "pfa_constrained", "reference_scenario", "tau_min", "throughput", "uniform_scenario",
]
