"""Minimum probability of lifetime exponential Parisian ruin.

Closed-form value functions and optimal investment strategies obtained from a
dual free-boundary problem, with a Monte Carlo simulator to check them.
"""

__version__ = "0.1.0"

from .dual import BranchSpec, DualSolution, SolverError, eval_g, solve_boundaries, solve_boundary_ratio
from .market import (PAPER_PARAMS, DerivedConstants, ModelParams, ParameterError, derive_constants,
                     validate)
from .simulate import (Clock, Mode, SimConfig, SimEstimate, SimulationError, Strategy,
                       estimate_occupation, estimate_value, simulate_path)
from .value import (ConvexityError, DomainError, OccupationValue, SandwichViolation, ValueFunction,
                    asymptotic_sandwich, hjb_residual, pi_monotonicity_condition, pi_zero,
                    psi_restricted)

__all__ = [
    "PAPER_PARAMS", "BranchSpec", "Clock", "ConvexityError", "DerivedConstants", "DomainError",
    "DualSolution", "Mode", "ModelParams", "OccupationValue", "ParameterError", "SandwichViolation",
    "SimConfig", "SimEstimate", "SimulationError", "SolverError", "Strategy", "ValueFunction",
    "asymptotic_sandwich", "derive_constants", "estimate_occupation", "estimate_value", "eval_g",
    "hjb_residual", "pi_monotonicity_condition", "pi_zero", "psi_restricted", "simulate_path",
    "solve_boundaries", "solve_boundary_ratio", "validate",
]
