"""Controlled multi-type branching processes: simulation, criticality and diffusion limits."""

from ._backend import NAME as BACKEND
from .engine import monte_carlo, simulate_trajectory
from .limit import euler_maruyama, gamma_marginal
from .model import ModelSpec, classify, conditional_cov, conditional_mean, limit_coefficients
from .presets import PRESETS, build_preset

__all__ = [
    "BACKEND",
    "ModelSpec",
    "PRESETS",
    "build_preset",
    "classify",
    "conditional_cov",
    "conditional_mean",
    "euler_maruyama",
    "gamma_marginal",
    "limit_coefficients",
    "monte_carlo",
    "simulate_trajectory",
]

__version__ = "0.1.0"
