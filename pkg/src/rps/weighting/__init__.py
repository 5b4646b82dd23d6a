"""Capital allocation for a chosen subset: MVO, HRP and the critical line
algorithm."""

from ._common import (
    FrontierPoint,
    MomentEstimates,
    PortfolioWeights,
    estimate_moments,
    regularize_covariance,
    validate_weights,
)
from .cla import cla_frontier, pick_max_sharpe
from .hrp import hrp_optimize
from .mvo import ConvergenceError, mvo_optimize

__all__ = [
    "ConvergenceError",
    "FrontierPoint",
    "MomentEstimates",
    "PortfolioWeights",
    "cla_frontier",
    "estimate_moments",
    "hrp_optimize",
    "mvo_optimize",
    "pick_max_sharpe",
    "regularize_covariance",
    "validate_weights",
]
