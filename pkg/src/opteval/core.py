"""Domain types, the empirical evaluator, and Monte Carlo oracles.

The batched calling convention used throughout the library:

* ``CostModel.value(x, samples)`` maps a decision and an ``(n, D_xi)``
  sample block to an ``(n,)`` cost vector.  ``x`` is one decision
  vector, or an ``(n, D_x)`` block of per-row decisions (contextual).
* ``CostModel.grad_theta(theta, samples, covariates=None)`` returns the
  ``(n, D_theta)`` block of per-sample cost gradients in the decision
  parameter, ``hess_theta`` the ``(n, D_theta, D_theta)`` block of
  Hessians.  Non-contextual costs ignore ``covariates``.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from .errors import DegenerateSample, FitFailure, NonFiniteCost
from .seeding import child_seed, rng_stream

SMOOTH = "smooth"
PIECEWISE = "piecewise"


@dataclass(frozen=True)
class Dataset:
    """An n-row sample matrix, optionally with covariates and a label column.

    Args:
        samples: (n, D_xi) array of observations.
        covariates: optional (n, D_z) array observed before each decision.
        label_col: optional index of the sample column holding the outcome
            component (regression case); the remaining columns are features.
    """

    samples: np.ndarray
    covariates: Optional[np.ndarray] = None
    label_col: Optional[int] = None

    def __post_init__(self):
        samples = np.atleast_2d(np.asarray(self.samples, dtype=float))
        object.__setattr__(self, "samples", samples)
        if samples.ndim != 2 or samples.shape[0] < 2 or samples.shape[1] < 1:
            raise ValueError("samples must be a matrix with n >= 2 rows and D_xi >= 1 columns")
        if not np.all(np.isfinite(samples)):
            raise ValueError("samples contain non-finite entries")
        if self.covariates is not None:
            cov = np.atleast_2d(np.asarray(self.covariates, dtype=float))
            object.__setattr__(self, "covariates", cov)
            if cov.shape[0] != samples.shape[0]:
                raise ValueError("covariates row count must equal sample row count")
            if not np.all(np.isfinite(cov)):
                raise ValueError("covariates contain non-finite entries")
        if self.label_col is not None and not 0 <= self.label_col < samples.shape[1]:
            raise ValueError("label_col out of range")

    @property
    def n(self) -> int:
        return self.samples.shape[0]

    @property
    def d_xi(self) -> int:
        return self.samples.shape[1]

    def rows(self, index) -> "Dataset":
        """Return the dataset restricted to the given row index array."""
        cov = None if self.covariates is None else self.covariates[index]
        return Dataset(self.samples[index], cov, self.label_col)

    def features_labels(self):
        """Split into (features, labels) using label_col."""
        if self.label_col is None:
            raise ValueError("dataset has no label column")
        mask = np.arange(self.d_xi) != self.label_col
        return self.samples[:, mask], self.samples[:, self.label_col]


@dataclass(frozen=True)
class CostModel:
    """Cost evaluator with first and second derivatives in the fit parameter.

    Args:
        value: callable (x, samples) -> (n,) costs.
        grad_theta: callable (theta, samples, covariates=None) -> (n, D_theta).
        hess_theta: callable (theta, samples, covariates=None)
            -> (n, D_theta, D_theta).
        smoothness: SMOOTH, or PIECEWISE for costs carrying a subgradient
            convention at kink points.
        subgradient_convention: human-readable note on the kink rule.
    """

    value: Callable
    grad_theta: Callable
    hess_theta: Optional[Callable] = None
    smoothness: str = SMOOTH
    subgradient_convention: Optional[str] = None


@dataclass(frozen=True)
class DecisionRule:
    """The map from fit parameter (and optional covariates) to a decision.

    ``decide(theta)`` returns a (D_x,) vector; with an (n, D_z) covariate
    block it returns (n, D_x) per-row decisions.  ``jacobian`` follows the
    same convention with one extra trailing parameter axis.
    """

    dim_theta: int
    decide: Callable
    jacobian: Optional[Callable] = None
    second_derivatives: Optional[Callable] = None


def identity_rule(dim: int) -> DecisionRule:
    """Decision class x = theta (sample average approximation)."""
    eye = np.eye(dim)
    return DecisionRule(
        dim_theta=dim,
        decide=lambda theta, covariates=None: np.asarray(theta, dtype=float),
        jacobian=lambda theta, covariates=None: eye,
    )


@dataclass(frozen=True)
class FitDiagnostics:
    iterations: int = 0
    grad_norm: float = 0.0
    tol: float = 0.0
    active_set: tuple = ()
    multipliers: tuple = ()


@dataclass(frozen=True)
class FittedPolicy:
    """A fitted parameter together with its decision rule and fit metadata."""

    theta_hat: np.ndarray
    rule: DecisionRule
    fit_method: str = "E2E"
    fit_diagnostics: FitDiagnostics = field(default_factory=FitDiagnostics)

    def __post_init__(self):
        theta = np.atleast_1d(np.asarray(self.theta_hat, dtype=float))
        object.__setattr__(self, "theta_hat", theta)
        if not np.all(np.isfinite(theta)):
            raise ValueError("theta_hat contains non-finite entries")

    def decision(self, data: Optional[Dataset] = None) -> np.ndarray:
        cov = data.covariates if data is not None else None
        return self.rule.decide(self.theta_hat, cov)


@dataclass(frozen=True)
class EvaluationReport:
    """A bias-corrected performance estimate.

    ``a_hat`` is defined as ``a_o + a_c`` and nothing else; it is exposed
    as a derived property so the identity cannot drift.
    """

    a_o: float
    a_c: float
    method: str
    n: int
    extras: dict = field(default_factory=dict)
    seed: Optional[int] = None

    @property
    def a_hat(self) -> float:
        return self.a_o + self.a_c


def per_sample_costs(policy: FittedPolicy, cost: CostModel, data: Dataset) -> np.ndarray:
    """Per-row costs h(x*(theta_hat [, z_i]); xi_i) as an (n,) array."""
    x = policy.decision(data)
    values = np.asarray(cost.value(x, data.samples), dtype=float)
    if values.shape != (data.n,):
        raise ValueError(f"cost.value returned shape {values.shape}, expected ({data.n},)")
    if not np.all(np.isfinite(values)):
        raise NonFiniteCost("cost evaluated to NaN/inf; degenerate fit or bad data row")
    return values


def evaluate_empirical(policy: FittedPolicy, cost: CostModel, data: Dataset) -> float:
    """Arithmetic mean of the cost over the dataset rows.

    Raises:
        NonFiniteCost: if any row evaluates to NaN or infinity.
    """
    return float(per_sample_costs(policy, cost, data).mean())


def oracle_true_performance(
    policy: FittedPolicy,
    cost: CostModel,
    generator: Callable[[int, int], Dataset],
    m: int = 100_000,
    seed: int = 0,
) -> tuple[float, float]:
    """Monte Carlo estimate of the expected true cost of a fixed policy.

    Args:
        policy: the fitted policy to evaluate.
        cost: cost model.
        generator: callable (seed, m) -> Dataset of m fresh draws from the
            true distribution (with covariates for contextual problems).
        m: number of fresh draws.
        seed: seed passed to the generator; results are reproducible.

    Returns:
        (mean cost, standard error of the mean).
    """
    fresh = generator(seed, m)
    values = per_sample_costs(policy, cost, fresh)
    return float(values.mean()), float(values.std(ddof=1) / np.sqrt(len(values)))


@dataclass(frozen=True)
class OracleBias:
    """Replicated estimate of the expected optimism of the empirical value."""

    mean: float
    stderr: float
    per_replication: np.ndarray
    n_failed: int


def oracle_expected_bias(
    fit: Callable[[Dataset], FittedPolicy],
    cost: CostModel,
    generator: Callable[[int, int], Dataset],
    n: int,
    replications: int = 100,
    m: int = 100_000,
    seed: int = 0,
    max_failure_fraction: float = 0.05,
) -> OracleBias:
    """Oracle estimate of E[A - A_o]: true minus in-sample cost of a refit.

    Each replication draws a fresh training set of size n with a seed
    derived from (seed, "rep", r), fits the pipeline, and compares its
    Monte Carlo true performance against its in-sample value.  Failed
    replications are reported, and the run aborts if more than
    ``max_failure_fraction`` of them fail.
    """
    gaps = []
    failures = []
    for r in range(replications):
        train_seed = child_seed(seed, "rep", r)
        eval_seed = child_seed(seed, "oracle", r)
        try:
            data = generator(train_seed, n)
            policy = fit(data)
            a_o = evaluate_empirical(policy, cost, data)
            a_true, _ = oracle_true_performance(policy, cost, generator, m, eval_seed)
            gaps.append(a_true - a_o)
        except (FitFailure, NonFiniteCost) as exc:  # pragma: no cover - rare path
            failures.append((r, exc))
    if len(failures) > max_failure_fraction * replications:
        raise FitFailure(
            f"{len(failures)}/{replications} replications failed: {failures[:3]}",
            index=[r for r, _ in failures],
        )
    gaps = np.asarray(gaps)
    return OracleBias(
        mean=float(gaps.mean()),
        stderr=float(gaps.std(ddof=1) / np.sqrt(len(gaps))),
        per_replication=gaps,
        n_failed=len(failures),
    )


def load_dataset_csv(path) -> Dataset:
    """Load a dataset from CSV with columns xi_0.., optional z_0.., optional y.

    The header row names the columns; the optional ``y`` column is stored
    as the last sample column and marked as the label.  Decimal parsing is
    locale independent (always '.').
    """
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        header = next(reader)
        rows = [row for row in reader if row]
    xi_cols = sorted(
        (name for name in header if name.startswith("xi_")),
        key=lambda s: int(s.split("_", 1)[1]),
    )
    z_cols = sorted(
        (name for name in header if name.startswith("z_")),
        key=lambda s: int(s.split("_", 1)[1]),
    )
    if not xi_cols:
        raise ValueError("CSV must contain at least one xi_<k> column")
    idx = {name: header.index(name) for name in header}
    data = np.array([[float(v) for v in row] for row in rows], dtype=float)
    samples = data[:, [idx[c] for c in xi_cols]]
    label_col = None
    if "y" in idx:
        samples = np.column_stack([samples, data[:, idx["y"]]])
        label_col = samples.shape[1] - 1
    covariates = data[:, [idx[c] for c in z_cols]] if z_cols else None
    return Dataset(samples, covariates, label_col)


def sampler_from(draw: Callable[[np.random.Generator, int], np.ndarray]) -> Callable:
    """Wrap an rng-based row sampler into the (seed, m) -> Dataset protocol."""

    def generate(seed: int, m: int) -> Dataset:
        rng = rng_stream(seed)
        return Dataset(draw(rng, m))

    return generate


def check_nondegenerate(values: np.ndarray, what: str = "sample"):
    """Raise DegenerateSample if the values have (numerically) zero spread."""
    values = np.asarray(values, dtype=float)
    if values.std() <= 1e-15 * (1.0 + np.abs(values).max()):
        raise DegenerateSample(f"{what} has zero variance")
