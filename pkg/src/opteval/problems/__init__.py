"""Concrete problem instances: costs, decision classes, and generators."""

from .base import ProblemInstance
from .contextual import build_contextual_newsvendor
from .exp_utility import build_portfolio_exp_utility
from .newsvendor import build_newsvendor
from .portfolio import build_portfolio_mv
from .regression import build_regression_threshold, load_wine_csv
from .registry import REGISTRY, build_problem, list_problems

__all__ = [
    "ProblemInstance",
    "build_contextual_newsvendor",
    "build_newsvendor",
    "build_portfolio_exp_utility",
    "build_portfolio_mv",
    "build_regression_threshold",
    "build_problem",
    "list_problems",
    "load_wine_csv",
    "REGISTRY",
]
