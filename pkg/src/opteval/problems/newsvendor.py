"""Single-item newsvendor benchmark.

Cost: h(x; xi) = c*x - p*min(xi, x) with p = 5, c = 2 by default, so the
optimal order is the q = 1 - c/p quantile of demand.  Demand is a noisy
normal or exponential: xi = xi_S + U(-5, 5).

Decision classes: empirical quantile (SAA), normal-model two-stage fit
(Normal), exponential-model two-stage fit (Exp), and the exponential
operational-statistics rule (Exp-OS) whose multiplier integrates the
estimation step into the ordering decision.
"""

from __future__ import annotations

import numpy as np
from scipy import stats

from ..baselines import Pipeline
from ..core import (
    CostModel,
    Dataset,
    DecisionRule,
    EvaluationReport,
    FitDiagnostics,
    FittedPolicy,
    identity_rule,
)
from ..criteria import ParametricModel, oic
from ..influence import InfluenceEstimate, mean_variance_influence
from ..seeding import rng_stream
from ..solvers import kde, smooth_link
from .base import ProblemInstance

DEFAULT_PRICE = 5.0
DEFAULT_COST = 2.0


def newsvendor_link(p: float, c: float):
    """Piecewise link f with h(x; xi) = f(x - xi) + const(xi), plus its
    a.e. derivative under the midpoint kink convention."""

    def value(z):
        z = np.asarray(z, dtype=float)
        return c * np.maximum(z, 0.0) + (p - c) * np.maximum(-z, 0.0)

    def deriv(z):
        z = np.asarray(z, dtype=float)
        out = np.where(z > 0.0, c, c - p)
        return np.where(z == 0.0, c - p / 2.0, out)

    return value, deriv


def _grad_x(x, xi, p, c):
    """Order-quantity gradient with the midpoint convention at ties."""
    out = np.where(x > xi, c, c - p)
    return np.where(x == xi, c - p / 2.0, out)


def empirical_quantile(values: np.ndarray, q: float) -> float:
    """Lowest order statistic at or above the q-th quantile level."""
    srt = np.sort(np.asarray(values, dtype=float).reshape(-1))
    k = int(np.ceil(q * len(srt)))
    return float(srt[max(k - 1, 0)])


def build_newsvendor(
    dgp: str = "normal",
    n_hint: int = 100,
    seed: int = 0,
    p: float = DEFAULT_PRICE,
    c: float = DEFAULT_COST,
) -> ProblemInstance:
    """Build the newsvendor instance.

    Args:
        dgp: "normal" for N(100, 40^2) + U(-5, 5) demand, "exp" for
            Exp(mean 100) + U(-5, 5).
        n_hint: typical training size (informational; recorded in params).
        seed: reserved for interface symmetry.
        p, c: selling price and order cost, p > c > 0.
    """
    if not p > c > 0:
        raise ValueError("need p > c > 0")
    if dgp not in ("normal", "exp"):
        raise ValueError("dgp must be 'normal' or 'exp'")
    q = 1.0 - c / p
    z_q = float(stats.norm.ppf(q))

    def sample(draw_seed: int, n: int) -> Dataset:
        rng = rng_stream(draw_seed)
        if dgp == "normal":
            base = rng.normal(100.0, 40.0, size=n)
        else:
            base = rng.exponential(100.0, size=n)
        return Dataset((base + rng.uniform(-5.0, 5.0, size=n))[:, None])

    def value(x, samples):
        xi = np.asarray(samples, dtype=float).reshape(-1)
        x = np.asarray(x, dtype=float).reshape(-1)
        x = x[0] if x.shape == (1,) else x
        return c * x - p * np.minimum(xi, x)

    def _xi(samples):
        return np.asarray(samples, dtype=float).reshape(-1)

    # --- SAA: empirical quantile ------------------------------------------
    saa_rule = identity_rule(1)

    def saa_grad(theta, samples, covariates=None):
        x = np.atleast_1d(theta)[0]
        return _grad_x(x, _xi(samples), p, c)[:, None]

    saa_cost = CostModel(
        value=value,
        grad_theta=saa_grad,
        hess_theta=None,
        smoothness="piecewise",
        subgradient_convention="midpoint value c - p/2 at exact ties",
    )

    def fit_saa(data: Dataset) -> FittedPolicy:
        theta = np.array([empirical_quantile(data.samples, q)])
        return FittedPolicy(theta, saa_rule, "E2E", FitDiagnostics(0, 0.0, 0.0))

    def saa_influence(policy: FittedPolicy, data: Dataset) -> InfluenceEstimate:
        xi = _xi(data.samples)
        density = kde(xi)(policy.theta_hat[0])
        rows = ((q - (xi <= policy.theta_hat[0])) / density)[:, None]
        return InfluenceEstimate(rows, rows.T @ rows / len(xi), "Custom", 1.0)

    def saa_oic(policy: FittedPolicy, data: Dataset) -> EvaluationReport:
        xi = _xi(data.samples)
        density = float(kde(xi)(policy.theta_hat[0]))
        a_o = float(value(policy.theta_hat, data.samples).mean())
        a_c = c * (p - c) / (data.n * p * density)
        return EvaluationReport(
            a_o=a_o, a_c=a_c, method="oic_quantile", n=data.n,
            extras={"density_at_fit": density},
        )

    # --- two-stage parametric rules ----------------------------------------
    def normal_decide(theta, covariates=None):
        mu, sg2 = np.asarray(theta, dtype=float)
        return np.array([mu + np.sqrt(max(sg2, 0.0)) * z_q])

    normal_rule = DecisionRule(
        dim_theta=2,
        decide=normal_decide,
        jacobian=lambda theta, covariates=None: np.array(
            [[1.0, z_q / (2.0 * np.sqrt(max(np.asarray(theta)[1], 1e-300)))]]
        ),
    )

    def exp_rule_with(factor: float) -> DecisionRule:
        return DecisionRule(
            dim_theta=1,
            decide=lambda theta, covariates=None, f=factor: np.array(
                [f * np.atleast_1d(theta)[0]]
            ),
            jacobian=lambda theta, covariates=None, f=factor: np.array([[f]]),
        )

    log_ratio = float(np.log(p / c))

    def os_factor(n: int) -> float:
        return float(n * ((p / c) ** (1.0 / (n + 1)) - 1.0))

    def fit_normal(data: Dataset) -> FittedPolicy:
        xi = _xi(data.samples)
        theta = np.array([xi.mean(), xi.var()])
        return FittedPolicy(theta, normal_rule, "ETO", FitDiagnostics(0, 0.0, 0.0))

    def fit_exp(data: Dataset) -> FittedPolicy:
        theta = np.array([_xi(data.samples).mean()])
        return FittedPolicy(theta, exp_rule_with(log_ratio), "ETO", FitDiagnostics(0, 0.0, 0.0))

    def fit_exp_os(data: Dataset) -> FittedPolicy:
        theta = np.array([_xi(data.samples).mean()])
        rule = exp_rule_with(os_factor(data.n))
        return FittedPolicy(theta, rule, "ETO", FitDiagnostics(0, 0.0, 0.0))

    def make_eto_cost(decide, jacobian) -> CostModel:
        def grad_theta(theta, samples, covariates=None):
            theta = np.atleast_1d(np.asarray(theta, dtype=float))
            x = float(decide(theta)[0])
            gx = _grad_x(x, _xi(samples), p, c)
            return gx[:, None] * np.asarray(jacobian(theta), dtype=float)

        return CostModel(
            value=value,
            grad_theta=grad_theta,
            hess_theta=None,
            smoothness="piecewise",
            subgradient_convention="midpoint value c - p/2 at exact ties",
        )

    normal_cost = make_eto_cost(normal_decide, normal_rule.jacobian)

    def exp_cost_for(policy: FittedPolicy) -> CostModel:
        return make_eto_cost(policy.rule.decide, policy.rule.jacobian)

    def normal_oic(policy: FittedPolicy, data: Dataset) -> EvaluationReport:
        return oic(policy, normal_cost, mean_variance_influence(data), data, method="oic_eto")

    def mean_influence(data: Dataset) -> InfluenceEstimate:
        xi = _xi(data.samples)
        rows = (xi - xi.mean())[:, None]
        return InfluenceEstimate(rows, rows.T @ rows / len(xi), "MEstimator", 1.0)

    def exp_oic(policy: FittedPolicy, data: Dataset) -> EvaluationReport:
        cost_model = exp_cost_for(policy)
        return oic(policy, cost_model, mean_influence(data), data, method="oic_eto")

    pipelines = {
        "SAA": Pipeline(fit_saa, saa_cost, "SAA", saa_oic, influence=saa_influence),
        "Normal": Pipeline(fit_normal, normal_cost, "Normal", normal_oic,
                           influence=lambda p, dat: mean_variance_influence(dat)),
        "Exp": Pipeline(fit_exp, saa_cost, "Exp", exp_oic,
                        influence=lambda p, dat: mean_influence(dat)),
        "Exp-OS": Pipeline(fit_exp_os, saa_cost, "Exp-OS", exp_oic,
                           influence=lambda p, dat: mean_influence(dat)),
    }
    params = {
        "p": p,
        "c": c,
        "q": q,
        "dgp": dgp,
        "n_hint": n_hint,
        "saa_influence": saa_influence,
    }
    return ProblemInstance(
        name=f"newsvendor_{dgp}",
        cost=saa_cost,
        rule=saa_rule,
        pipelines=pipelines,
        dgp=sample,
        params=params,
    )


def smoothed_trace_oic(
    instance: ProblemInstance,
    policy: FittedPolicy,
    data: Dataset,
    m: float = 50.0,
    n_quad: int = 201,
) -> EvaluationReport:
    """Generic trace-form estimate for the quantile fit via smoothing.

    The averaged cost curvature at the fit is the kink weight p times the
    local demand density; it is computed as the expectation of the
    smoothed-cost second derivative under the kernel density estimate of
    demand (the raw empirical average of a width-1/m mollifier is
    degenerate for m far above the data scale).
    """
    p = instance.params["p"]
    c = instance.params["c"]
    xi = data.samples.reshape(-1)
    theta = float(policy.theta_hat[0])
    link_value, link_deriv = newsvendor_link(p, c)
    link = smooth_link(link_value, link_deriv, m, n_quad=n_quad)
    density = kde(xi)
    nodes = np.linspace(-1.0, 1.0, n_quad)
    h = nodes[1] - nodes[0]
    weights = np.full(n_quad, 2.0)
    weights[1::2] = 4.0
    weights[0] = weights[-1] = 1.0
    weights *= h / 3.0
    z = nodes / m
    i_hat = float(np.sum(weights / m * link.second_deriv(z) * density(theta - z)))
    gx = _grad_x(theta, xi, p, c)
    j_hat = float((gx**2).mean())
    a_o = float(instance.cost.value(policy.theta_hat, data.samples).mean())
    a_c = j_hat / (i_hat * data.n)
    return EvaluationReport(
        a_o=a_o, a_c=a_c, method="oic_trace_smoothed", n=data.n,
        extras={"i_hat": i_hat, "j_hat": j_hat, "smoothing_m": m},
    )


def parametric_model(instance: ProblemInstance, label: str, n: int | None = None) -> ParametricModel:
    """Parametric law and expected-cost callables for a two-stage pipeline.

    Args:
        n: fitting sample size; only the operational-statistics rule
            depends on it (defaults to the instance's n_hint).
    """
    p = instance.params["p"]
    c = instance.params["c"]
    q = instance.params["q"]
    z_q = float(stats.norm.ppf(q))
    log_ratio = float(np.log(p / c))
    if n is None:
        n = instance.params["n_hint"]

    if label in ("Exp", "Exp-OS"):
        if label == "Exp":
            a = log_ratio
        else:
            a = float(n * ((p / c) ** (1.0 / (n + 1)) - 1.0))

        def expected_cost(theta_dist, theta_dec):
            td = float(np.atleast_1d(theta_dist)[0])
            x = a * float(np.atleast_1d(theta_dec)[0])
            return c * x - p * td * (1.0 - np.exp(-x / td))

        def hess_expected_cost(theta):
            t0 = float(np.atleast_1d(theta)[0])
            return np.array([[p * a**2 / t0 * np.exp(-a)]])

        def sampler(theta, sample_seed, m):
            rng = rng_stream(sample_seed)
            return rng.exponential(float(np.atleast_1d(theta)[0]), size=m)[:, None]

        return ParametricModel(
            dim_theta=1,
            expected_cost=expected_cost,
            sampler=sampler,
            hess_expected_cost=hess_expected_cost,
        )

    if label == "Normal":
        def expected_cost(theta_dist, theta_dec):
            mu_d, sg2_d = np.asarray(theta_dist, dtype=float)
            mu_t, sg2_t = np.asarray(theta_dec, dtype=float)
            x = mu_t + np.sqrt(max(sg2_t, 1e-300)) * z_q
            sd = np.sqrt(max(sg2_d, 1e-300))
            z = (x - mu_d) / sd
            e_min = mu_d * stats.norm.cdf(z) - sd * stats.norm.pdf(z) + x * (
                1.0 - stats.norm.cdf(z)
            )
            return c * x - p * e_min

        def sampler(theta, sample_seed, m):
            mu_d, sg2_d = np.asarray(theta, dtype=float)
            rng = rng_stream(sample_seed)
            return rng.normal(mu_d, np.sqrt(max(sg2_d, 0.0)), size=m)[:, None]

        return ParametricModel(dim_theta=2, expected_cost=expected_cost, sampler=sampler)

    raise KeyError(f"no parametric model for pipeline {label!r}")
