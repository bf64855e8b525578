"""Problem registry keyed by the names accepted in experiment configs."""

from __future__ import annotations

from .contextual import build_contextual_newsvendor
from .exp_utility import build_portfolio_exp_utility
from .newsvendor import build_newsvendor
from .portfolio import build_portfolio_mv
from .regression import build_regression_threshold

REGISTRY = {
    "portfolio_mv": build_portfolio_mv,
    "portfolio_exp_utility": build_portfolio_exp_utility,
    "newsvendor_normal": lambda **kw: build_newsvendor(dgp="normal", **kw),
    "newsvendor_exp": lambda **kw: build_newsvendor(dgp="exp", **kw),
    "contextual_newsvendor": build_contextual_newsvendor,
    "regression_threshold": build_regression_threshold,
}


def list_problems() -> list[str]:
    return sorted(REGISTRY)


def build_problem(name: str, **params):
    """Instantiate a registered problem by name with keyword parameters."""
    try:
        builder = REGISTRY[name]
    except KeyError:
        raise KeyError(
            f"unknown problem {name!r}; available: {', '.join(list_problems())}"
        ) from None
    return builder(**params)
