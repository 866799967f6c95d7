"""Stochastic online min-cost perfect matching with delays."""
from .arrivals import GenConfig, Model, derive_seed, generate, random_metric
from .errors import (
    BoundViolation,
    Infeasible,
    InsufficientRange,
    InvariantViolation,
    MPMDError,
    TooLarge,
    Unreachable,
    ValidationError,
)
from .harness import ExperimentConfig, analytic_bounds, bound_check, run_experiment
from .model import (
    LINEAR,
    DelaySpec,
    MetricSpace,
    Request,
    RequestSequence,
    Solution,
    solution_cost,
    validate_metric,
)
from .offline import (
    MatchInstance,
    instance_from_sequence,
    optimal_solution,
    solve_opt_blossom,
    solve_opt_dp,
    solve_opt_fp,
)
from .online import run_bipartite_greedy, run_greedy, run_mpmdfp, run_radius
from .radius import RadiusTable, compute_Kf, radius_table

__version__ = "0.1.0"

__all__ = [
    "GenConfig", "Model", "derive_seed", "generate", "random_metric",
    "BoundViolation", "Infeasible", "InsufficientRange", "InvariantViolation", "MPMDError",
    "TooLarge", "Unreachable", "ValidationError",
    "ExperimentConfig", "analytic_bounds", "bound_check", "run_experiment",
    "LINEAR", "DelaySpec", "MetricSpace", "Request", "RequestSequence", "Solution",
    "solution_cost", "validate_metric",
    "MatchInstance", "instance_from_sequence", "optimal_solution", "solve_opt_blossom",
    "solve_opt_dp", "solve_opt_fp",
    "run_bipartite_greedy", "run_greedy", "run_mpmdfp", "run_radius",
    "RadiusTable", "compute_Kf", "radius_table",
]
