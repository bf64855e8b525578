"""Bias-corrected performance estimators.

Sign bookkeeping (owned here, pinned by tests): ``a_c`` is always the
signed correction *added* to the empirical value ``a_o``.  The generic
estimator computes ``a_c = -(1/n^2) sum <grad_i, IF_i>``; for
empirical-risk fits the influence rows are ``-I^{-1} grad_i``, so the
trace form carries a plus sign: ``a_c = +(1/n) Tr[I^{-1} J]``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Sequence, Union

import numpy as np

from .core import CostModel, Dataset, EvaluationReport, FittedPolicy, evaluate_empirical
from .errors import (
    MissingCovariates,
    ModelEvalFailure,
    NonFiniteCost,
    NonFiniteGradient,
    NotAtOptimum,
    RowMismatch,
    SingularHessian,
)
from .influence import (
    Constraint,
    InfluenceEstimate,
    _checked_inverse,
    active_set_projection,
    sym_pinv,
)


@dataclass(frozen=True)
class ParametricModel:
    """A parametric distribution family used by the parametric estimator.

    Args:
        dim_theta: parameter dimension.
        expected_cost: callable (theta_dist, theta_dec) -> scalar expected
            cost of the decision x*(theta_dec) under the law P_{theta_dist}.
        sampler: callable (theta, seed, m) -> (m, D_xi) draws from P_theta.
        hess_expected_cost: optional callable theta -> (D, D) Hessian of
            t |-> expected_cost(theta, t) at t = theta; finite differences
            are used when absent.
        expected_cost_x: optional callable (theta, x) -> scalar expected
            cost of a raw decision x under P_theta (used by the
            implicit-function machinery).
    """

    dim_theta: int
    expected_cost: Callable
    sampler: Optional[Callable] = None
    hess_expected_cost: Optional[Callable] = None
    expected_cost_x: Optional[Callable] = None


@dataclass(frozen=True)
class PoicEstimate:
    """Parametric performance estimate and its components."""

    a_p: float
    parametric_cost: float
    trace_term: float
    extras: dict = field(default_factory=dict)


def _gradients(cost: CostModel, theta_hat, data: Dataset) -> np.ndarray:
    grads = np.atleast_2d(
        np.asarray(cost.grad_theta(theta_hat, data.samples, data.covariates), dtype=float)
    )
    if not np.all(np.isfinite(grads)):
        raise NonFiniteGradient("cost gradient evaluated to NaN/inf")
    return grads


def _correction_report(
    a_o: float,
    grads: np.ndarray,
    influence: InfluenceEstimate,
    method: str,
    extras: Optional[dict] = None,
) -> EvaluationReport:
    n = grads.shape[0]
    if influence.per_sample.shape[0] != n:
        raise RowMismatch(
            f"{influence.per_sample.shape[0]} influence rows for {n} data rows"
        )
    inner = np.einsum("ij,ij->i", grads, influence.per_sample)
    a_c = -inner.sum() / n**2
    rms_grad = np.sqrt((grads**2).sum(axis=1).mean())
    rms_if = np.sqrt((influence.per_sample**2).sum(axis=1).mean())
    out = {
        "cauchy_schwarz_bound": rms_grad * rms_if / n,
        "psi_condition": influence.conditioning,
    }
    if extras:
        out.update(extras)
    return EvaluationReport(a_o=a_o, a_c=float(a_c), method=method, n=n, extras=out)


def oic(
    policy: FittedPolicy,
    cost: CostModel,
    influence: InfluenceEstimate,
    data: Dataset,
    method: str = "oic",
) -> EvaluationReport:
    """Generic bias-corrected estimate from per-sample gradients and IFs.

    ``a_c = -(1/n^2) sum_i grad_i . IF_i`` added to the empirical mean;
    the Cauchy-Schwarz cap on |a_c| is recorded in ``extras``.

    Raises:
        RowMismatch: influence rows do not align with data rows.
        NonFiniteGradient: a gradient evaluated to NaN/inf.
    """
    a_o = evaluate_empirical(policy, cost, data)
    grads = _gradients(cost, policy.theta_hat, data)
    return _correction_report(a_o, grads, influence, method)


def oic_trace(
    cost: CostModel,
    theta_hat: np.ndarray,
    data: Dataset,
    rule=None,
    solver_tol: float = 1e-8,
    condition_cap: float = 1e10,
    method: str = "oic_trace",
    check_optimum: bool = True,
) -> EvaluationReport:
    """Trace-form estimate for empirical-risk fits.

    ``a_c = +(1/n) Tr[I^{-1} J]`` with I the averaged Hessian and J the
    averaged gradient outer product at theta_hat.  Identical to ``oic``
    composed with the empirical-risk influence construction.

    Args:
        rule: decision rule for computing a_o; identity when omitted.
        check_optimum: guard that the averaged empirical gradient vanishes.
            Robust fits are stationary for the worst-case objective, not
            the empirical one, so their evaluator disables the guard and
            the gradient norm is recorded in ``extras`` instead.
    """
    from .core import identity_rule

    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    if rule is None:
        rule = identity_rule(len(theta_hat))
    policy = FittedPolicy(theta_hat, rule)
    a_o = evaluate_empirical(policy, cost, data)
    grads = _gradients(cost, theta_hat, data)
    n = grads.shape[0]
    mean_grad = grads.mean(axis=0)
    if check_optimum and np.linalg.norm(mean_grad) > 10.0 * solver_tol:
        raise NotAtOptimum(
            f"averaged gradient norm {np.linalg.norm(mean_grad):.3e} exceeds "
            f"{10.0 * solver_tol:.1e}; refit first"
        )
    hess = np.asarray(cost.hess_theta(theta_hat, data.samples, data.covariates), dtype=float)
    i_hat = hess.mean(axis=0)
    i_inv, cond = _checked_inverse(i_hat, condition_cap, SingularHessian)
    j_hat = grads.T @ grads / n
    trace = float(np.trace(i_inv @ j_hat))
    a_c = trace / n
    extras = {
        "trace": trace,
        "hessian_condition": cond,
        "mean_gradient_norm": float(np.linalg.norm(mean_grad)),
        "cauchy_schwarz_bound": np.sqrt((grads**2).sum(axis=1).mean())
        * np.sqrt(((grads @ i_inv.T) ** 2).sum(axis=1).mean())
        / n,
    }
    return EvaluationReport(a_o=a_o, a_c=a_c, method=method, n=n, extras=extras)


@dataclass(frozen=True)
class Regularizer:
    """A twice-differentiable penalty R(x*(theta)) expressed in theta."""

    value: Callable
    grad: Callable
    hess: Callable


def oic_regularized(
    cost: CostModel,
    regularizer: Regularizer,
    lam: float,
    theta_hat: np.ndarray,
    data: Dataset,
    rule=None,
    solver_tol: float = 1e-8,
    condition_cap: float = 1e10,
) -> EvaluationReport:
    """Bias-corrected estimate for a penalty-fitted empirical-risk policy.

    The fit minimizes the penalized objective h + lam*R; the estimate
    targets the true performance of h itself.  ``a_o`` is the unpenalized
    empirical mean; ``a_c`` is the trace correction of the penalized
    objective, whose averaged gradient (not h's) must vanish at the fit.
    Equivalently a_hat is the penalized empirical optimum plus the
    penalized correction minus the penalty; both decompositions are
    recorded in ``extras``.
    """
    from .core import identity_rule

    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    if rule is None:
        rule = identity_rule(len(theta_hat))
    policy = FittedPolicy(theta_hat, rule)
    a_o = evaluate_empirical(policy, cost, data)
    grads = _gradients(cost, theta_hat, data) + lam * np.asarray(
        regularizer.grad(theta_hat), dtype=float
    )
    n = grads.shape[0]
    mean_grad = grads.mean(axis=0)
    if np.linalg.norm(mean_grad) > 10.0 * solver_tol:
        raise NotAtOptimum(
            f"averaged penalized gradient norm {np.linalg.norm(mean_grad):.3e} "
            f"exceeds {10.0 * solver_tol:.1e}"
        )
    hess = np.asarray(cost.hess_theta(theta_hat, data.samples, data.covariates), dtype=float)
    i_hat = hess.mean(axis=0) + lam * np.asarray(regularizer.hess(theta_hat), dtype=float)
    i_inv, cond = _checked_inverse(i_hat, condition_cap, SingularHessian)
    j_hat = grads.T @ grads / n
    a_c = float(np.trace(i_inv @ j_hat)) / n
    penalty = float(lam) * float(regularizer.value(theta_hat))
    extras = {
        "penalized_trace_correction": a_c,
        "penalty_value": penalty,
        "penalized_a_o": a_o + penalty,
        "hessian_condition": cond,
    }
    return EvaluationReport(
        a_o=a_o, a_c=a_c, method="oic_regularized", n=n, extras=extras
    )


def oic_constrained(
    cost: CostModel,
    constraints: Sequence[Constraint],
    theta_hat: np.ndarray,
    multipliers: np.ndarray,
    data: Dataset,
    rule=None,
    active_tol: float = 1e-8,
    method: str = "oic_constrained",
) -> EvaluationReport:
    """Projected trace-form estimate for a fit with binding constraints.

    ``a_c = +(1/n) Tr[P (I_{h,alpha})^+ P J]`` with P the tangent-space
    projector of the active set.
    """
    from .core import identity_rule
    from .errors import NegativeMultiplier

    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    multipliers = np.asarray(multipliers, dtype=float)
    if rule is None:
        rule = identity_rule(len(theta_hat))
    policy = FittedPolicy(theta_hat, rule)
    a_o = evaluate_empirical(policy, cost, data)
    active = [
        j for j, g in enumerate(constraints) if abs(float(g.value(theta_hat))) <= active_tol
    ]
    if any(multipliers[j] < -1e-8 for j in active):
        raise NegativeMultiplier("negative multiplier on the active set")
    proj, c_rows = active_set_projection(constraints, theta_hat, active)
    grads = _gradients(cost, theta_hat, data)
    n = grads.shape[0]
    hess = np.asarray(cost.hess_theta(theta_hat, data.samples, data.covariates), dtype=float)
    i_halpha = hess.mean(axis=0)
    for j in active:
        i_halpha = i_halpha + multipliers[j] * constraints[j].hess_at(theta_hat)
    i_pinv, cond = sym_pinv(i_halpha)
    core_mat = proj @ i_pinv @ proj
    j_hat = grads.T @ grads / n
    trace = float(np.trace(core_mat @ j_hat))
    extras = {
        "trace": trace,
        "active_set": tuple(active),
        "hessian_condition": cond,
        "cauchy_schwarz_bound": np.sqrt((grads**2).sum(axis=1).mean())
        * np.sqrt(((grads @ core_mat.T) ** 2).sum(axis=1).mean())
        / n,
    }
    return EvaluationReport(a_o=a_o, a_c=trace / n, method=method, n=n, extras=extras)


def _fd_hessian(f: Callable, theta: np.ndarray, rel_step: float = 1e-4) -> np.ndarray:
    """Central-difference Hessian with per-coordinate step 1e-4*(1+|theta_k|)."""
    theta = np.asarray(theta, dtype=float)
    d = len(theta)
    steps = rel_step * (1.0 + np.abs(theta))
    hess = np.empty((d, d))
    f0 = f(theta)
    for i in range(d):
        ei = np.zeros(d)
        ei[i] = steps[i]
        for j in range(i, d):
            ej = np.zeros(d)
            ej[j] = steps[j]
            if i == j:
                val = (f(theta + ei) - 2.0 * f0 + f(theta - ei)) / steps[i] ** 2
            else:
                val = (
                    f(theta + ei + ej)
                    - f(theta + ei - ej)
                    - f(theta - ei + ej)
                    + f(theta - ei - ej)
                ) / (4.0 * steps[i] * steps[j])
            hess[i, j] = hess[j, i] = val
    return hess


def poic(
    model: ParametricModel,
    theta_hat: np.ndarray,
    influence: InfluenceEstimate,
    policy: Optional[FittedPolicy] = None,
) -> PoicEstimate:
    """Parametric performance estimate: model-expected cost plus trace term.

    ``a_p = E_{P_theta_hat}[h(x*(theta_hat))] + (1/2n) Tr[I_h Psi_hat]``
    with I_h the Hessian of the model-expected cost in the decision
    parameter and Psi_hat the sandwich covariance of the fit.

    Raises:
        ModelEvalFailure: the model-expected cost is not finite.
    """
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    base = float(model.expected_cost(theta_hat, theta_hat))
    if not np.isfinite(base):
        raise ModelEvalFailure("expected_cost is not finite at theta_hat")
    if model.hess_expected_cost is not None:
        i_h = np.asarray(model.hess_expected_cost(theta_hat), dtype=float)
    else:
        i_h = _fd_hessian(lambda t: float(model.expected_cost(theta_hat, t)), theta_hat)
    i_h = np.atleast_2d(i_h)
    n = influence.n
    trace_term = float(np.trace(i_h @ influence.psi_hat)) / (2.0 * n)
    if not np.isfinite(trace_term):
        raise ModelEvalFailure("trace term is not finite")
    return PoicEstimate(
        a_p=base + trace_term,
        parametric_cost=base,
        trace_term=trace_term,
        extras={"i_h_diag": tuple(np.diag(i_h))},
    )


def misspecification_error(
    report: EvaluationReport, a_p: Union[float, PoicEstimate]
) -> float:
    """Estimated model misspecification error: a_hat minus the parametric estimate."""
    if isinstance(a_p, PoicEstimate):
        a_p = a_p.a_p
    return report.a_hat - float(a_p)


def context_oic(
    policy: FittedPolicy,
    cost: CostModel,
    influence: InfluenceEstimate,
    data: Dataset,
    method: str = "context_oic",
) -> EvaluationReport:
    """Bias-corrected estimate with per-row covariate-dependent decisions.

    Identical in structure to :func:`oic` but decisions, gradients, and
    influence rows are evaluated on the joint rows (z_i, xi_i).

    Raises:
        MissingCovariates: the dataset has no covariate block.
    """
    if data.covariates is None:
        raise MissingCovariates("context_oic requires covariates")
    a_o = evaluate_empirical(policy, cost, data)
    grads = _gradients(cost, policy.theta_hat, data)
    return _correction_report(a_o, grads, influence, method)


def context_misspecification(
    report: EvaluationReport,
    conditional_expected_cost: Callable,
    cost: CostModel,
    theta_hat: np.ndarray,
    influence: InfluenceEstimate,
    data: Dataset,
) -> float:
    """Contextual misspecification estimate.

    ``B_hat = a_hat_context - (1/n) sum_i A_hat_{z_i}`` with
    ``A_hat_z = E_{P_theta_hat | z}[h] + (1/2n) Tr[I_{h,z} Psi_hat]``.

    Args:
        conditional_expected_cost: callable (theta, covariates) -> (n,)
            model-expected costs of the fitted decision per covariate row.
    """
    if data.covariates is None:
        raise MissingCovariates("contextual misspecification requires covariates")
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    cond_costs = np.asarray(
        conditional_expected_cost(theta_hat, data.covariates), dtype=float
    )
    if not np.all(np.isfinite(cond_costs)):
        raise ModelEvalFailure("conditional expected cost is not finite")
    hess = np.asarray(cost.hess_theta(theta_hat, data.samples, data.covariates), dtype=float)
    i_hz = hess.mean(axis=0)
    n = data.n
    trace_term = float(np.trace(i_hz @ influence.psi_hat)) / (2.0 * n)
    return report.a_hat - float(cond_costs.mean()) - trace_term


def alo_estimate(
    policy: FittedPolicy,
    cost: CostModel,
    influence: InfluenceEstimate,
    data: Dataset,
) -> float:
    """One-step approximate leave-one-out mean cost.

    Each held-out fit is approximated by theta_hat - IF_i / n; no
    optimization problems are solved.
    """
    n = data.n
    if influence.per_sample.shape[0] != n:
        raise RowMismatch("influence rows must align with data rows")
    total = 0.0
    for i in range(n):
        theta_i = policy.theta_hat - influence.per_sample[i] / n
        cov_i = None if data.covariates is None else data.covariates[i : i + 1]
        x_i = policy.rule.decide(theta_i, cov_i)
        value = np.asarray(cost.value(x_i, data.samples[i : i + 1]), dtype=float)
        if not np.all(np.isfinite(value)):
            raise NonFiniteCost(f"leave-one-out cost at row {i} is not finite")
        total += float(value.reshape(-1)[0])
    return total / n
