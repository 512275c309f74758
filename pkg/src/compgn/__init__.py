"""Backtracking composite Gauss-Newton (prox-linear) solver and diagnostics."""

from .problem import (CompositeProblem, DimensionError, FeasibleSet, OuterConvex,
                      SmoothMap, model_h, objective)
from .subproblem import (InnerBudgetError, InnerConfig, SubproblemSolution,
                         criticality_measure, solve_subproblem)

__all__ = [
    "CompositeProblem", "DimensionError", "FeasibleSet", "OuterConvex", "SmoothMap",
    "model_h", "objective", "InnerBudgetError", "InnerConfig", "SubproblemSolution",
    "criticality_measure", "solve_subproblem",
]
