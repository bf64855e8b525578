"""Mean-variance portfolio benchmark with five decision classes.

Cost: h(x; xi) = (r'x)^2 - lam1 * xi'x + lam2 * |x|^2 with r = xi - mu,
mu the (known) mean of the returns.  Returns come in two independent
asset blocks with uniform-random means and factor-style covariances.

Decision classes: full-vector empirical fit (SAA), one shared weight
(SAA-U), one weight per block (SAA-B), a Gaussian independent-margins
parametric fit (Param), and the chi-square robust fit (DRO).
"""

from __future__ import annotations

import numpy as np

from ..baselines import Pipeline
from ..core import CostModel, Dataset, DecisionRule, FitDiagnostics, FittedPolicy, identity_rule
from ..criteria import oic, oic_trace
from ..influence import if_e2e, mean_variance_influence
from ..seeding import rng_stream
from ..solvers import DroSettings, SolverSettings, fit_chi2_dro
from .base import ProblemInstance

DEFAULT_LAM1 = 1.0
DEFAULT_LAM2 = 2.0


def _draw_instance_params(d_xi: int, seed: int):
    if d_xi % 2:
        raise ValueError("d_xi must be even (two asset blocks)")
    rng = rng_stream(seed, "instance")
    half = d_xi // 2
    mu = rng.uniform(0.0, 4.0, size=d_xi)
    chol = np.zeros((d_xi, d_xi))
    for lo in (0, half):
        c = rng.uniform(0.0, 0.5, size=(half, half))
        chol[lo : lo + half, lo : lo + half] = np.linalg.cholesky(
            c @ c.T + 1e-12 * np.eye(half)
        )
    return mu, chol


def build_portfolio_mv(
    d_xi: int = 10,
    seed: int = 0,
    lam1: float = DEFAULT_LAM1,
    lam2: float = DEFAULT_LAM2,
    rho: float = 3.0,
) -> ProblemInstance:
    """Build the mean-variance portfolio instance.

    Args:
        d_xi: number of assets (even; two blocks).
        seed: instance seed fixing the block means and covariances.
        lam1, lam2: return-seeking and weight-penalty coefficients.
        rho: ambiguity scale of the robust pipeline (radius rho/n).
    """
    mu, chol = _draw_instance_params(d_xi, seed)
    d = d_xi
    eye = np.eye(d)
    half = d // 2
    blocks = np.zeros((d, 2))
    blocks[:half, 0] = 1.0
    blocks[half:, 1] = 1.0
    ones = np.ones(d)
    settings = SolverSettings()

    def dgp(draw_seed: int, n: int) -> Dataset:
        rng = rng_stream(draw_seed)
        return Dataset(mu + rng.standard_normal((n, d)) @ chol.T)

    def value(x, samples):
        x = np.asarray(x, dtype=float)
        r = samples - mu
        return (r @ x) ** 2 - lam1 * (samples @ x) + lam2 * (x @ x)

    # --- SAA: x = theta in R^d -------------------------------------------
    def saa_grad(theta, samples, covariates=None):
        r = samples - mu
        return 2.0 * (r @ theta)[:, None] * r - lam1 * samples + 2.0 * lam2 * theta

    def saa_hess(theta, samples, covariates=None):
        r = samples - mu
        return 2.0 * (r[:, :, None] * r[:, None, :] + lam2 * eye)

    saa_cost = CostModel(value=value, grad_theta=saa_grad, hess_theta=saa_hess)
    saa_rule = identity_rule(d)

    def fit_saa(data: Dataset) -> FittedPolicy:
        r = data.samples - mu
        a_hat = r.T @ r / data.n
        theta = np.linalg.solve(2.0 * (a_hat + lam2 * eye), lam1 * data.samples.mean(axis=0))
        grad_norm = float(np.linalg.norm(saa_grad(theta, data.samples).mean(axis=0)))
        return FittedPolicy(theta, saa_rule, "E2E", FitDiagnostics(1, grad_norm, settings.tol))

    # --- SAA-U: x = theta * 1 --------------------------------------------
    def u_grad(theta, samples, covariates=None):
        t = np.atleast_1d(theta)[0]
        r = samples - mu
        s = r @ ones
        return (2.0 * (s**2 + lam2 * d) * t - lam1 * (samples @ ones))[:, None]

    def u_hess(theta, samples, covariates=None):
        r = samples - mu
        s = r @ ones
        return (2.0 * (s**2 + lam2 * d))[:, None, None]

    u_rule = DecisionRule(
        dim_theta=1,
        decide=lambda theta, covariates=None: np.atleast_1d(theta)[0] * ones,
        jacobian=lambda theta, covariates=None: ones[:, None],
    )
    u_cost = CostModel(value=value, grad_theta=u_grad, hess_theta=u_hess)

    def fit_u(data: Dataset) -> FittedPolicy:
        r = data.samples - mu
        s = r @ ones
        denom = 2.0 * ((s**2).mean() + lam2 * d)
        theta = np.array([lam1 * (data.samples @ ones).mean() / denom])
        gnorm = float(abs(u_grad(theta, data.samples).mean()))
        return FittedPolicy(theta, u_rule, "E2E", FitDiagnostics(1, gnorm, settings.tol))

    # --- SAA-B: one weight per block --------------------------------------
    def b_grad(theta, samples, covariates=None):
        r = samples - mu
        t2 = r @ blocks
        q = t2 @ theta
        return 2.0 * q[:, None] * t2 - lam1 * (samples @ blocks) + 2.0 * lam2 * half * theta

    def b_hess(theta, samples, covariates=None):
        r = samples - mu
        t2 = r @ blocks
        return 2.0 * (t2[:, :, None] * t2[:, None, :] + lam2 * half * np.eye(2))

    b_rule = DecisionRule(
        dim_theta=2,
        decide=lambda theta, covariates=None: blocks @ np.asarray(theta, dtype=float),
        jacobian=lambda theta, covariates=None: blocks,
    )
    b_cost = CostModel(value=value, grad_theta=b_grad, hess_theta=b_hess)

    def fit_b(data: Dataset) -> FittedPolicy:
        r = data.samples - mu
        t2 = r @ blocks
        m_mat = 2.0 * (t2.T @ t2 / data.n + lam2 * half * np.eye(2))
        theta = np.linalg.solve(m_mat, lam1 * (data.samples @ blocks).mean(axis=0))
        gnorm = float(np.linalg.norm(b_grad(theta, data.samples).mean(axis=0)))
        return FittedPolicy(theta, b_rule, "E2E", FitDiagnostics(1, gnorm, settings.tol))

    # --- Param: Gaussian independent-margins fit, then optimize ----------
    def param_decide(theta, covariates=None):
        mu_t = theta[:d]
        sg2_t = theta[d:]
        u = mu_t - mu
        m_mat = np.diag(sg2_t) + np.outer(u, u) + lam2 * eye
        return np.linalg.solve(m_mat, lam1 * mu_t / 2.0)

    def param_jacobian(theta, covariates=None):
        mu_t = theta[:d]
        sg2_t = theta[d:]
        u = mu_t - mu
        m_mat = np.diag(sg2_t) + np.outer(u, u) + lam2 * eye
        m_inv = np.linalg.inv(m_mat)
        x = m_inv @ (lam1 * mu_t / 2.0)
        ux = float(u @ x)
        jac = np.empty((d, 2 * d))
        for k in range(d):
            e = np.zeros(d)
            e[k] = 1.0
            jac[:, k] = m_inv @ (lam1 / 2.0 * e - e * ux - u * x[k])
            jac[:, d + k] = -m_inv[:, k] * x[k]
        return jac

    param_rule = DecisionRule(dim_theta=2 * d, decide=param_decide, jacobian=param_jacobian)

    def param_grad(theta, samples, covariates=None):
        x = param_decide(theta)
        r = samples - mu
        gx = 2.0 * (r @ x)[:, None] * r - lam1 * samples + 2.0 * lam2 * x
        return gx @ param_jacobian(theta)

    param_cost = CostModel(value=value, grad_theta=param_grad, hess_theta=None)

    def fit_param(data: Dataset) -> FittedPolicy:
        mu_hat = data.samples.mean(axis=0)
        sg2_hat = ((data.samples - mu_hat) ** 2).mean(axis=0)
        theta = np.concatenate([mu_hat, sg2_hat])
        return FittedPolicy(theta, param_rule, "ETO", FitDiagnostics(0, 0.0, settings.tol))

    # --- DRO: chi-square robust fit over the SAA class --------------------
    dro_settings = DroSettings(rho=rho)

    def fit_dro(data: Dataset) -> FittedPolicy:
        start = fit_saa(data).theta_hat
        return fit_chi2_dro(saa_cost, saa_rule, data, dro_settings, settings, theta0=start)

    def trace_oic(policy: FittedPolicy, data: Dataset, cost_model, rule):
        return oic_trace(
            cost_model,
            policy.theta_hat,
            data,
            rule=rule,
            solver_tol=settings.tol,
            check_optimum=policy.fit_method != "DRE2E",
        )

    def param_oic(policy: FittedPolicy, data: Dataset):
        return oic(policy, param_cost, mean_variance_influence(data), data)

    def e2e_influence(cost_model):
        def build(policy: FittedPolicy, data: Dataset):
            return if_e2e(
                cost_model,
                policy.theta_hat,
                data,
                solver_tol=settings.tol if policy.fit_method != "DRE2E" else np.inf,
            )

        return build

    pipelines = {
        "SAA": Pipeline(fit_saa, saa_cost, "SAA",
                        lambda p, dat: trace_oic(p, dat, saa_cost, saa_rule),
                        influence=e2e_influence(saa_cost)),
        "SAA-U": Pipeline(fit_u, u_cost, "SAA-U",
                          lambda p, dat: trace_oic(p, dat, u_cost, u_rule),
                          influence=e2e_influence(u_cost)),
        "SAA-B": Pipeline(fit_b, b_cost, "SAA-B",
                          lambda p, dat: trace_oic(p, dat, b_cost, b_rule),
                          influence=e2e_influence(b_cost)),
        "Param": Pipeline(fit_param, param_cost, "Param", param_oic,
                          influence=lambda p, dat: mean_variance_influence(dat)),
        "DRO": Pipeline(fit_dro, saa_cost, "DRO",
                        lambda p, dat: trace_oic(p, dat, saa_cost, saa_rule),
                        influence=e2e_influence(saa_cost)),
    }
    params = {
        "d_xi": d_xi,
        "lam1": lam1,
        "lam2": lam2,
        "rho": rho,
        "mu": mu,
        "chol": chol,
    }
    return ProblemInstance(
        name="portfolio_mv",
        cost=saa_cost,
        rule=saa_rule,
        pipelines=pipelines,
        dgp=dgp,
        params=params,
    )
