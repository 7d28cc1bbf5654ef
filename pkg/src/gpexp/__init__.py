"""Capacity, error exponents and binning simulation for watermarking games with side information."""

from .binary import c_deg, c_priv, delta2, er_cam_deg_closed, er_cam_pub_closed, g_star
from .exponents import (
    CapacityEstimator,
    ExponentEstimator,
    ExponentProblem,
    SolverConfig,
    capacity_CL,
    er_cam,
    er_cdmc,
    error_exponent,
    sweep_rates,
)
from .pmf import (
    CondPmf,
    JointPmf,
    conditional_mutual_information,
    entropy,
    j_functional,
    kl_divergence,
    mutual_information,
)
from .scenarios import ScenarioSpec, build_preset, load_scenario, scenario_from_dict

__version__ = "0.1.0"

__all__ = [
    "CapacityEstimator",
    "CondPmf",
    "ExponentEstimator",
    "ExponentProblem",
    "JointPmf",
    "ScenarioSpec",
    "SolverConfig",
    "__version__",
    "build_preset",
    "c_deg",
    "c_priv",
    "capacity_CL",
    "conditional_mutual_information",
    "delta2",
    "entropy",
    "er_cam",
    "er_cam_deg_closed",
    "er_cam_pub_closed",
    "er_cdmc",
    "error_exponent",
    "g_star",
    "j_functional",
    "kl_divergence",
    "load_scenario",
    "mutual_information",
    "scenario_from_dict",
    "sweep_rates",
]
