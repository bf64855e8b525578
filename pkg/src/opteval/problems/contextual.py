"""Contextual newsvendor with a linear-in-covariates order rule.

Demand is linear in an observed covariate plus Gaussian noise; the
decision class orders x = theta'z.  The pipeline fits the kernel-smoothed
ordering loss by Newton (smooth enough for trace-form evaluation), and
the evaluator corrects the joint-row empirical value.
"""

from __future__ import annotations

import numpy as np

from ..baselines import Pipeline
from ..core import CostModel, Dataset, DecisionRule, FittedPolicy
from ..criteria import context_oic
from ..influence import if_e2e
from ..seeding import rng_stream
from ..solvers import SolverSettings, newton_minimize, smooth_link
from .base import ProblemInstance
from .newsvendor import newsvendor_link

DEFAULT_THETA = (80.0, 40.0)
DEFAULT_NOISE_SD = 15.0
DEFAULT_BANDWIDTH = 5.0


def build_contextual_newsvendor(
    seed: int = 0,
    theta_true=DEFAULT_THETA,
    noise_sd: float = DEFAULT_NOISE_SD,
    p: float = 5.0,
    c: float = 2.0,
    bandwidth: float = DEFAULT_BANDWIDTH,
) -> ProblemInstance:
    """Build the contextual newsvendor instance.

    Args:
        theta_true: coefficients of the linear demand mean on z = (1, u).
        noise_sd: demand noise standard deviation.
        bandwidth: smoothing width of the fitted ordering loss (the
            smoothed model is the pipeline's declared cost).
    """
    theta_true = np.asarray(theta_true, dtype=float)
    d_z = len(theta_true)
    link_value, link_deriv = newsvendor_link(p, c)
    link = smooth_link(link_value, link_deriv, 1.0 / bandwidth)
    settings = SolverSettings()

    def dgp(draw_seed: int, n: int) -> Dataset:
        rng = rng_stream(draw_seed)
        z = np.column_stack([np.ones(n), rng.uniform(0.0, 1.0, size=(n, d_z - 1))])
        xi = z @ theta_true + rng.normal(0.0, noise_sd, size=n)
        return Dataset(xi[:, None], covariates=z)

    def value(x, samples):
        xi = np.asarray(samples, dtype=float).reshape(-1)
        x = np.asarray(x, dtype=float).reshape(-1)
        x = x[0] if x.shape == (1,) and xi.shape != (1,) else x
        return link.value(x - xi) + (c - p) * xi

    def residuals(theta, samples, covariates):
        xi = np.asarray(samples, dtype=float).reshape(-1)
        return covariates @ np.asarray(theta, dtype=float) - xi

    def grad_theta(theta, samples, covariates=None):
        u = residuals(theta, samples, covariates)
        return link.deriv(u)[:, None] * covariates

    def hess_theta(theta, samples, covariates=None):
        u = residuals(theta, samples, covariates)
        return link.second_deriv(u)[:, None, None] * (
            covariates[:, :, None] * covariates[:, None, :]
        )

    cost = CostModel(value=value, grad_theta=grad_theta, hess_theta=hess_theta)
    rule = DecisionRule(
        dim_theta=d_z,
        decide=lambda theta, covariates=None: (
            covariates @ np.asarray(theta, dtype=float)
            if covariates is not None
            else np.asarray(theta, dtype=float)
        ),
        jacobian=lambda theta, covariates=None: covariates,
    )

    def fit(data: Dataset) -> FittedPolicy:
        z = data.covariates
        xi = data.samples.reshape(-1)
        start, *_ = np.linalg.lstsq(z, xi, rcond=None)
        return newton_minimize(
            lambda t: float(value(z @ t, data.samples).mean()),
            lambda t: grad_theta(t, data.samples, z).mean(axis=0),
            lambda t: hess_theta(t, data.samples, z).mean(axis=0),
            start,
            settings,
            rule=rule,
            fit_method="E2E",
        )

    def ctx_influence(policy: FittedPolicy, data: Dataset):
        return if_e2e(cost, policy.theta_hat, data, solver_tol=settings.tol)

    def ctx_oic(policy: FittedPolicy, data: Dataset):
        return context_oic(policy, cost, ctx_influence(policy, data), data)

    pipelines = {"E2E": Pipeline(fit, cost, "E2E", ctx_oic, influence=ctx_influence)}
    params = {
        "theta_true": theta_true,
        "noise_sd": noise_sd,
        "p": p,
        "c": c,
        "bandwidth": bandwidth,
    }
    return ProblemInstance(
        name="contextual_newsvendor",
        cost=cost,
        rule=rule,
        pipelines=pipelines,
        dgp=dgp,
        params=params,
    )


def conditional_expected_cost_factory(instance: ProblemInstance, sigma: float):
    """Model-expected smoothed cost per covariate row, ``xi | z ~ N(theta'z, sigma^2)``.

    Gauss-Hermite quadrature of the smoothed link around each conditional
    mean; used by the contextual misspecification estimator.
    """
    p = instance.params["p"]
    c = instance.params["c"]
    bandwidth = instance.params["bandwidth"]
    link_value, link_deriv = newsvendor_link(p, c)
    link = smooth_link(link_value, link_deriv, 1.0 / bandwidth)
    nodes, weights = np.polynomial.hermite_e.hermegauss(64)
    weights = weights / np.sqrt(2.0 * np.pi)

    def conditional(theta, covariates):
        theta = np.asarray(theta, dtype=float)
        x = covariates @ theta
        mean = covariates @ theta  # well-specified conditional mean model
        draws = mean[:, None] + sigma * nodes[None, :]
        vals = link.value(x[:, None] - draws) + (c - p) * draws
        return vals @ weights

    return conditional
