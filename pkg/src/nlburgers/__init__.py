"""Nonlocal viscous Burgers solver with verification diagnostics."""

__version__ = "0.1.0"

from .discretization import DiscreteKernel, Grid, GridFunction, convolve, discretize_pair, lp_norm, mass
from .evolution import RunRecord, SimulationState, rhs, simulate, stable_dt, step
from .kernels import KernelPair, exponential_pair, gaussian_pair, tabulated_pair, tophat_pair, validate_kernel_pair
from .profiles import Profile, build_profile_closed_form, build_profile_shooting, evaluate_U

__all__ = [
    "DiscreteKernel",
    "Grid",
    "GridFunction",
    "KernelPair",
    "Profile",
    "RunRecord",
    "SimulationState",
    "build_profile_closed_form",
    "build_profile_shooting",
    "convolve",
    "discretize_pair",
    "evaluate_U",
    "exponential_pair",
    "gaussian_pair",
    "lp_norm",
    "mass",
    "rhs",
    "simulate",
    "stable_dt",
    "step",
    "tabulated_pair",
    "tophat_pair",
    "validate_kernel_pair",
]
