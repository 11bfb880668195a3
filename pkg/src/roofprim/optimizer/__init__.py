from .config import CostBreakdown, FitResult, OptimizerConfig
from .cost import CostModel, cost
from .fitting import (
    boundary_of, classify, default_alpha_radius, fit, initial_guess, select_best,
    selection_score,
)
from .gradient import fd_gradient
from .lbfgsb import lbfgsb_minimize

__all__ = [
    "CostBreakdown", "CostModel", "FitResult", "OptimizerConfig", "boundary_of", "classify",
    "cost", "default_alpha_radius", "fd_gradient", "fit", "initial_guess", "lbfgsb_minimize",
    "select_best", "selection_score",
]
