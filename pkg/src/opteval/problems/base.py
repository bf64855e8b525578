"""Shared problem-instance container."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Dict

from ..baselines import Pipeline
from ..core import CostModel, Dataset, DecisionRule


@dataclass(frozen=True)
class ProblemInstance:
    """A benchmark problem: cost, decision classes, and data generator.

    Attributes:
        name: registry name of the instance.
        cost: the representative cost model (the one shared by every
            decision class in x-space).
        rule: the representative (identity/SAA) decision rule.
        pipelines: decision classes by label; each pipeline carries its
            own theta-space cost derivatives and its bias-corrected
            evaluator wiring.
        dgp: callable (seed, n) -> Dataset of fresh draws from the true
            distribution (deterministic given seed).
        params: instance parameters recorded in output metadata.
        oracle_m: default Monte Carlo draw count for true-performance
            evaluation.
    """

    name: str
    cost: CostModel
    rule: DecisionRule
    pipelines: Dict[str, Pipeline]
    dgp: Callable[[int, int], Dataset]
    params: dict = field(default_factory=dict)
    oracle_m: int = 100_000
