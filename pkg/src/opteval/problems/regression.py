"""Thresholded-loss regression benchmark.

Cost: h(theta; (u, y)) = ((y - theta'phi(u))^2 - beta)^+ where phi is a
polynomial feature map and beta the tolerated squared error.  Models are
fitted by plain or ridge least squares, then evaluated under the
thresholded loss with least-squares influence rows.

A synthetic curved-response generator stands in when no real CSV is
supplied; the wine-format loader reads the semicolon-delimited quality
dataset layout.
"""

from __future__ import annotations

import csv
from itertools import combinations_with_replacement

import numpy as np

from ..baselines import Pipeline
from ..core import CostModel, Dataset, FitDiagnostics, FittedPolicy, identity_rule
from ..criteria import oic
from ..errors import SingularDesign
from ..influence import if_ols
from ..seeding import rng_stream
from .base import ProblemInstance

DEFAULT_BETA = 0.25


def polynomial_features(raw: np.ndarray, degree: int) -> np.ndarray:
    """Intercept plus all monomials of the raw features up to ``degree``."""
    raw = np.atleast_2d(np.asarray(raw, dtype=float))
    n, d = raw.shape
    cols = [np.ones(n)]
    for deg in range(1, degree + 1):
        for combo in combinations_with_replacement(range(d), deg):
            cols.append(np.prod(raw[:, combo], axis=1))
    return np.column_stack(cols)


def _synthetic_draw(rng: np.random.Generator, n: int) -> np.ndarray:
    u = rng.uniform(-1.0, 1.0, size=(n, 3))
    y = (
        1.0
        + u[:, 0]
        - 0.5 * u[:, 1]
        + 0.8 * u[:, 0] * u[:, 1]
        + 0.6 * u[:, 2] ** 2
        + rng.normal(0.0, 0.5, size=n)
    )
    return np.column_stack([u, y])


def build_regression_threshold(
    degree: int = 1,
    alpha: float = 0.0,
    beta: float = DEFAULT_BETA,
    source=None,
    seed: int = 0,
) -> ProblemInstance:
    """Build a thresholded-loss regression instance.

    Args:
        degree: polynomial degree of the feature map.
        alpha: ridge penalty of the fit (0 for plain least squares).
        beta: squared-error threshold of the evaluation cost (> 0).
        source: optional (features, labels) arrays from a real dataset;
            the synthetic curved-response generator is used when absent.
        seed: instance seed (synthetic case only).
    """
    if beta <= 0:
        raise ValueError("beta must be positive")

    def dgp(draw_seed: int, n: int) -> Dataset:
        rng = rng_stream(draw_seed)
        data = _synthetic_draw(rng, n)
        return Dataset(data, label_col=data.shape[1] - 1)

    if source is not None:
        raw_features, labels = source
        fixed = np.column_stack([np.asarray(raw_features, dtype=float), labels])

        def dgp(draw_seed: int, n: int) -> Dataset:  # noqa: F811 - intentional override
            rng = rng_stream(draw_seed)
            idx = rng.choice(len(fixed), size=min(n, len(fixed)), replace=False)
            return Dataset(fixed[idx], label_col=fixed.shape[1] - 1)

    probe = dgp(seed, 8)
    dim_theta = polynomial_features(probe.features_labels()[0], degree).shape[1]

    def split(samples):
        raw = samples[:, :-1]
        return polynomial_features(raw, degree), samples[:, -1]

    def value(theta, samples):
        feats, labels = split(np.atleast_2d(samples))
        r = labels - feats @ np.asarray(theta, dtype=float)
        return np.maximum(r**2 - beta, 0.0)

    def grad_theta(theta, samples, covariates=None):
        feats, labels = split(np.atleast_2d(samples))
        r = labels - feats @ np.asarray(theta, dtype=float)
        excess = r**2 - beta
        weight = np.where(excess > 0.0, 1.0, 0.0)
        weight = np.where(excess == 0.0, 0.5, weight)
        return (-2.0 * r * weight)[:, None] * feats

    cost = CostModel(
        value=value,
        grad_theta=grad_theta,
        hess_theta=None,
        smoothness="piecewise",
        subgradient_convention="half weight exactly at the threshold",
    )
    rule = identity_rule(dim_theta)

    def fit(data: Dataset) -> FittedPolicy:
        feats, labels = split(data.samples)
        n, d = feats.shape
        gram = feats.T @ feats + alpha * np.eye(d)
        if alpha == 0.0:
            s = np.linalg.svd(gram, compute_uv=False)
            if s[-1] <= 1e-10 * max(s[0], 1.0):
                raise SingularDesign("feature matrix is rank deficient")
        theta = np.linalg.solve(gram, feats.T @ labels)
        return FittedPolicy(theta, rule, "E2E", FitDiagnostics(0, 0.0, 0.0))

    def regression_influence(policy: FittedPolicy, data: Dataset):
        feats, labels = split(data.samples)
        return if_ols(feats, labels, policy.theta_hat, ridge_lam=alpha / data.n)

    def regression_oic(policy: FittedPolicy, data: Dataset):
        return oic(policy, cost, regression_influence(policy, data), data, method="oic_ols")

    label = f"poly{degree}" + (f"-ridge{alpha:g}" if alpha else "")
    pipelines = {label: Pipeline(fit, cost, label, regression_oic, influence=regression_influence)}
    params = {"degree": degree, "alpha": alpha, "beta": beta, "dim_theta": dim_theta}
    return ProblemInstance(
        name="regression_threshold",
        cost=cost,
        rule=rule,
        pipelines=pipelines,
        dgp=dgp,
        params=params,
    )


def load_wine_csv(path):
    """Load a wine-format CSV: semicolon-delimited features + quality label.

    Any column named ``quality`` becomes the label; a ``type``/``color``
    column (red/white strings) becomes the stratification group; all other
    columns are numeric features.

    Returns:
        (features, labels, groups) with groups None if no type column.
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh, delimiter=";")
        header = [h.strip().strip('"') for h in next(reader)]
        rows = [row for row in reader if row]
    lower = [h.lower() for h in header]
    if "quality" not in lower:
        raise ValueError("wine-format CSV must contain a 'quality' column")
    label_idx = lower.index("quality")
    group_idx = next((i for i, h in enumerate(lower) if h in ("type", "color")), None)
    feature_idx = [i for i in range(len(header)) if i not in (label_idx, group_idx)]
    features = np.array(
        [[float(row[i]) for i in feature_idx] for row in rows], dtype=float
    )
    labels = np.array([float(row[label_idx]) for row in rows], dtype=float)
    groups = None
    if group_idx is not None:
        names = sorted({row[group_idx].strip().strip('"') for row in rows})
        mapping = {name: k for k, name in enumerate(names)}
        groups = np.array([mapping[row[group_idx].strip().strip('"')] for row in rows])
    return features, labels, groups


def stratified_split(n_total: int, fraction: float, groups, seed: int):
    """Per-group random split; returns (train_idx, test_idx)."""
    rng = rng_stream(seed, "split")
    if groups is None:
        groups = np.zeros(n_total, dtype=int)
    train = []
    test = []
    for g in np.unique(groups):
        idx = np.flatnonzero(groups == g)
        perm = rng.permutation(idx)
        k = max(2, int(round(fraction * len(idx))))
        train.append(perm[:k])
        test.append(perm[k:])
    return np.sort(np.concatenate(train)), np.sort(np.concatenate(test))
