"""Safe active incremental feature selection for L1-penalized regression.

SAIF solves the LASSO with squared or logistic loss by running coordinate
minimization on a small, growing active set and certifying every excluded
feature with a dual ball test. Baseline solvers (plain coordinate
minimization, dynamic gap screening), a tree fused-LASSO reduction and
scikit-learn style estimators are included.
"""

__version__ = "0.1.0"

from .baselines import log_lambda_grid, solve_dynamic, solve_path, solve_plain
from .dual import (Ball, dual_point, gap_ball, gap_radius, intersect_balls, lambda_max,
                   sequential_ball)
from .engine import SaifConfig, solve
from .exceptions import (ConsistencyError, ConvergenceError, DimensionError, DomainError,
                         ParameterError, ParseError, PreconditionError, SaifError, SchemaError,
                         ValidationError)
from .fused import FeatureTree, build_transform, fused_lambda_max, solve_fused, transform_design
from .losses import DesignMatrix, Loss, Problem, dual_objective, duality_gap, primal_objective
from .results import SolveResult, Trace

__all__ = [
    "Ball", "ConsistencyError", "ConvergenceError", "DesignMatrix", "DimensionError", "DomainError",
    "FeatureTree", "Loss", "ParameterError", "ParseError", "PreconditionError", "Problem",
    "SaifConfig", "SaifError", "SchemaError", "SolveResult", "Trace", "ValidationError",
    "build_transform", "dual_objective", "dual_point", "duality_gap", "fused_lambda_max",
    "gap_ball", "gap_radius", "intersect_balls", "lambda_max", "log_lambda_grid",
    "primal_objective", "sequential_ball", "solve", "solve_dynamic", "solve_fused", "solve_path",
    "solve_plain", "transform_design",
]
