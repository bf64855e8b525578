"""Reference evaluators: cross-validation, bootstrap, and jackknife.

These all re-run the full estimation procedure on subsets or resamples,
so they are the expensive-but-model-free yardsticks the bias-corrected
estimators are compared against.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .core import CostModel, Dataset, EvaluationReport, FittedPolicy, evaluate_empirical
from .errors import FitFailure
from .seeding import rng_stream

LOOCV_WARN_N = 5000


@dataclass(frozen=True)
class Pipeline:
    """A full estimation procedure bundled with its cost and evaluator.

    Args:
        fit: callable Dataset -> FittedPolicy re-running the estimation,
            including any inner optimization; deterministic given the data.
        cost: the cost model the policy is evaluated under.
        label: short name used in experiment output.
        oic: optional callable (policy, data) -> EvaluationReport wiring
            the pipeline's bias-corrected evaluator.
        influence: optional callable (policy, data) -> InfluenceEstimate
            wiring the pipeline's influence construction (used by the
            one-step leave-one-out approximation).
    """

    fit: Callable[[Dataset], FittedPolicy]
    cost: CostModel
    label: str
    oic: Optional[Callable[[FittedPolicy, Dataset], EvaluationReport]] = None
    influence: Optional[Callable] = None


def _fit_or_fail(pipeline: Pipeline, data: Dataset, index) -> FittedPolicy:
    try:
        return pipeline.fit(data)
    except FitFailure:
        raise
    except Exception as exc:
        raise FitFailure(f"fit failed at {index}: {exc}", index=index) from exc


def _fold_indices(n: int, k: int, seed: int) -> list[np.ndarray]:
    """Seeded shuffle then contiguous blocks with sizes differing by <= 1."""
    perm = rng_stream(seed, "folds").permutation(n)
    return [np.sort(block) for block in np.array_split(perm, k)]


def _held_out_costs(pipeline: Pipeline, policy: FittedPolicy, data: Dataset, idx) -> np.ndarray:
    """Evaluate a fitted policy on rows idx without constructing a Dataset."""
    cov = None if data.covariates is None else data.covariates[idx]
    x = policy.rule.decide(policy.theta_hat, cov)
    return np.asarray(pipeline.cost.value(x, data.samples[idx]), dtype=float)


def kfold_cv(pipeline: Pipeline, data: Dataset, k: int, seed: int = 0) -> float:
    """K-fold cross-validation estimate of the true cost.

    Each row is held out exactly once; the returned value is the mean
    held-out cost over all n rows.

    Raises:
        FitFailure: a fold fit failed (carries the fold index); partial
            averages are never returned.
    """
    n = data.n
    if not 2 <= k <= n:
        raise ValueError(f"K must lie in [2, n]; got {k} with n={n}")
    held_out = np.empty(n)
    for fold, idx in enumerate(_fold_indices(n, k, seed)):
        mask = np.ones(n, dtype=bool)
        mask[idx] = False
        policy = _fit_or_fail(pipeline, data.rows(np.flatnonzero(mask)), ("fold", fold))
        held_out[idx] = _held_out_costs(pipeline, policy, data, idx)
    if not np.all(np.isfinite(held_out)):
        raise FitFailure("non-finite held-out cost in cross-validation")
    return float(held_out.mean())


def loocv(pipeline: Pipeline, data: Dataset) -> float:
    """Leave-one-out cross-validation (n refits).

    Warns above n = 5000; use the one-step approximation for large n.
    """
    n = data.n
    if n > LOOCV_WARN_N:
        warnings.warn(f"LOOCV with n={n} refits the pipeline {n} times", RuntimeWarning)
    total = 0.0
    for i in range(n):
        mask = np.ones(n, dtype=bool)
        mask[i] = False
        policy = _fit_or_fail(pipeline, data.rows(np.flatnonzero(mask)), ("loo", i))
        cost = float(_held_out_costs(pipeline, policy, data, np.array([i]))[0])
        if not np.isfinite(cost):
            raise FitFailure(f"non-finite held-out cost at row {i}", index=i)
        total += cost
    return total / n


def bc_kfold_cv(pipeline: Pipeline, data: Dataset, k: int, seed: int = 0) -> float:
    """Bias-corrected K-fold: the held-out mean minus the training optimism.

    Returns ``A_kcv - (A_train_bar - A_o)`` where ``A_train_bar`` averages
    each fold model's in-sample error on its own training fold and ``A_o``
    is the full-fit empirical value; the correction cancels the O(1/n)
    pessimism of plain K-fold.
    """
    n = data.n
    if not 2 <= k <= n:
        raise ValueError(f"K must lie in [2, n]; got {k} with n={n}")
    held_out = np.empty(n)
    train_means = []
    for fold, idx in enumerate(_fold_indices(n, k, seed)):
        mask = np.ones(n, dtype=bool)
        mask[idx] = False
        train = data.rows(np.flatnonzero(mask))
        policy = _fit_or_fail(pipeline, train, ("fold", fold))
        held_out[idx] = _held_out_costs(pipeline, policy, data, idx)
        train_means.append(evaluate_empirical(policy, pipeline.cost, train))
    a_kcv = float(held_out.mean())
    a_train = float(np.mean(train_means))
    full_policy = _fit_or_fail(pipeline, data, "full")
    a_o = evaluate_empirical(full_policy, pipeline.cost, data)
    return a_kcv - (a_train - a_o)


def bootstrap_debias(
    pipeline: Pipeline,
    data: Dataset,
    b_t: int = 50,
    seed: int = 0,
    return_replicates: bool = False,
):
    """Bootstrap-debiased estimate ``2 A_o - mean_b A_{o,b}``.

    Each replicate refits on an n-out-of-n resample (with replacement) and
    evaluates in-bag; the average in-bag optimism is reflected around A_o.
    """
    if b_t < 1:
        raise ValueError("B_T must be at least 1")
    n = data.n
    full_policy = _fit_or_fail(pipeline, data, "full")
    a_o = evaluate_empirical(full_policy, pipeline.cost, data)
    replicates = np.empty(b_t)
    for b in range(b_t):
        idx = rng_stream(seed, "boot", b).integers(0, n, size=n)
        resample = data.rows(idx)
        policy = _fit_or_fail(pipeline, resample, ("boot", b))
        replicates[b] = evaluate_empirical(policy, pipeline.cost, resample)
    estimate = 2.0 * a_o - float(replicates.mean())
    if return_replicates:
        return estimate, replicates
    return estimate


def jackknife_debias(pipeline: Pipeline, data: Dataset) -> float:
    """Jackknife-debiased estimate ``n A_o - ((n-1)/n) sum_k A_{o,k}``.

    ``A_{o,k}`` is the leave-one-out policy's in-sample error on its own
    n-1 training rows.
    """
    n = data.n
    full_policy = _fit_or_fail(pipeline, data, "full")
    a_o = evaluate_empirical(full_policy, pipeline.cost, data)
    loo_means = np.empty(n)
    for i in range(n):
        mask = np.ones(n, dtype=bool)
        mask[i] = False
        train = data.rows(np.flatnonzero(mask))
        policy = _fit_or_fail(pipeline, train, ("loo", i))
        loo_means[i] = evaluate_empirical(policy, pipeline.cost, train)
    return n * a_o - (n - 1.0) / n * float(loo_means.sum())
