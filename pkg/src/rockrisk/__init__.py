"""Risk-averse PDE-constrained optimal control with Rockafellian relaxation.

Submodules
----------
smoothing     softplus smoothing of the positive part
risk          CVaR over weighted outcomes
optim         L-BFGS, bisection and the perturbation LP
sampling      scenario sets, densities, quadrature and low-discrepancy points
pde1d         1D diffusion control problem
pde2d         advection-diffusion control on the unit disk
nqe           nested quantile estimation
rockafellian  relaxation over perturbed scenario weights
analysis      error metrics, empirical CDFs and output
experiments   drivers for the tables and figures; ``cli`` wraps them
"""

from .nqe import NqeConfig, NqeResult, nqe_solve
from .risk import RiskSpec, WeightedOutcomes, cvar_exact, cvar_smoothed, solve_gamma
from .rockafellian import BoundMode, RockConfig, RockResult, adi_minimize
from .smoothing import SmoothingParams, plus_smooth, plus_smooth_derivative

__version__ = "0.1.0"

__all__ = [
    "BoundMode", "NqeConfig", "NqeResult", "RiskSpec", "RockConfig", "RockResult",
    "SmoothingParams", "WeightedOutcomes", "adi_minimize", "cvar_exact", "cvar_smoothed",
    "nqe_solve", "plus_smooth", "plus_smooth_derivative", "solve_gamma",
]
