"""Small-scale fitting and smoothing machinery used by the pipelines.

Everything here is dense and deliberately simple: the problems this
library targets have at most a few hundred parameters, so robustness
(eigenvalue-floored Newton, backtracking, golden-section inner searches)
beats speed.
"""

from __future__ import annotations

from dataclasses import dataclass, replace
from typing import Callable, Optional, Sequence

import numpy as np
from scipy import optimize as sciopt

from .core import CostModel, Dataset, DecisionRule, FitDiagnostics, FittedPolicy, identity_rule
from .errors import (
    AscentDetected,
    DegenerateSample,
    DualDegenerate,
    InfeasibleStart,
    KKTFailure,
    MaxIterExceeded,
    SingularInnerHessian,
)
from .influence import Constraint


@dataclass(frozen=True)
class SolverSettings:
    """Newton solver knobs shared by all fitting routines."""

    tol: float = 1e-8
    max_iter: int = 200
    line_shrink: float = 0.5
    sufficient_decrease: float = 1e-4
    hessian_floor: float = 1e-10

    def __post_init__(self):
        for name in ("tol", "max_iter", "line_shrink", "sufficient_decrease", "hessian_floor"):
            if getattr(self, name) <= 0:
                raise ValueError(f"{name} must be positive")


@dataclass(frozen=True)
class DroSettings:
    """Ambiguity-set knobs for the chi-square robust fit (radius rho/n)."""

    rho: float = 1.0
    divergence: str = "chi2"
    inner_tol: float = 1e-10

    def __post_init__(self):
        if self.rho < 0:
            raise ValueError("rho must be nonnegative")
        if self.divergence != "chi2":
            raise ValueError("only the chi-square divergence is supported")


def _floored_solve(hess: np.ndarray, grad: np.ndarray, floor: float) -> np.ndarray:
    hess = 0.5 * (hess + hess.T)
    w, v = np.linalg.eigh(hess)
    w = np.maximum(w, floor)
    return (v * (1.0 / w)) @ v.T @ grad


def newton_minimize(
    value: Callable,
    grad: Callable,
    hess: Callable,
    theta0: np.ndarray,
    settings: SolverSettings = SolverSettings(),
    rule: Optional[DecisionRule] = None,
    fit_method: str = "E2E",
) -> FittedPolicy:
    """Damped Newton descent with eigenvalue-floored Hessians.

    Args:
        value, grad, hess: objective callables over theta.
        theta0: starting point.
        settings: stopping and line-search knobs.
        rule: decision rule recorded on the returned policy (identity when
            omitted).
        fit_method: tag recorded on the returned policy.

    Returns:
        FittedPolicy whose diagnostics carry iterations and the final
        gradient norm (guaranteed <= settings.tol).

    Raises:
        AscentDetected: line search found no decreasing step.
        MaxIterExceeded: iteration cap reached before convergence.
    """
    theta = np.atleast_1d(np.asarray(theta0, dtype=float)).copy()
    if rule is None:
        rule = identity_rule(len(theta))
    f_cur = float(value(theta))
    for iteration in range(settings.max_iter):
        g = np.asarray(grad(theta), dtype=float)
        gnorm = float(np.linalg.norm(g))
        if gnorm <= settings.tol:
            return FittedPolicy(
                theta, rule, fit_method,
                FitDiagnostics(iterations=iteration, grad_norm=gnorm, tol=settings.tol),
            )
        step = _floored_solve(np.asarray(hess(theta), dtype=float), g, settings.hessian_floor)
        slope = float(g @ step)
        if slope <= 1e-13 * (1.0 + abs(f_cur)):
            # predicted decrease below float resolution: quadratic basin,
            # take the raw Newton step
            theta = theta - step
            f_cur = float(value(theta))
            continue
        t = 1.0
        for _ in range(80):
            cand = theta - t * step
            f_new = float(value(cand))
            if f_new <= f_cur - settings.sufficient_decrease * t * slope:
                break
            t *= settings.line_shrink
        else:
            raise AscentDetected(f"no decrease along Newton direction at iter {iteration}")
        theta, f_cur = cand, f_new
    raise MaxIterExceeded(f"gradient norm {gnorm:.3e} > tol after {settings.max_iter} iterations")


def _golden_min(f: Callable, lo: float, hi: float, tol: float, max_iter: int = 400):
    ratio = (np.sqrt(5.0) - 1.0) / 2.0
    a, b = lo, hi
    c = b - ratio * (b - a)
    d = a + ratio * (b - a)
    fc, fd = f(c), f(d)
    for _ in range(max_iter):
        if (b - a) <= tol * (1.0 + abs(a) + abs(b)):
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - ratio * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + ratio * (b - a)
            fd = f(d)
    x = 0.5 * (a + b)
    return x, f(x)


def chi2_worst_case(costs: np.ndarray, eps: float, inner_tol: float = 1e-10):
    """Worst-case mean cost over the chi-square ball of radius eps.

    Solves the two-variable convex dual; for the chi-square divergence the
    multiplier alpha has a closed form given the shift beta, leaving a 1-D
    golden-section search over beta.

    Returns:
        (value, weights, alpha, beta) where weights are the worst-case
        probabilities (summing to one at an interior solution).

    Raises:
        DualDegenerate: alpha collapsed to zero with eps > 0.
        DegenerateSample: all costs identical (no reweighting possible).
    """
    costs = np.asarray(costs, dtype=float)
    n = len(costs)
    if eps == 0.0:
        return float(costs.mean()), np.full(n, 1.0 / n), np.inf, float(costs.mean())
    span = float(costs.max() - costs.min())
    if span <= 1e-14 * (1.0 + np.abs(costs).max()):
        raise DegenerateSample("costs are constant; chi-square reweighting is degenerate")

    def dual(beta: float) -> float:
        t = np.maximum(costs - beta, 0.0)
        return float(np.sqrt((1.0 + eps) * np.mean(t**2)) + beta)

    lo = float(costs.mean() - 2.0 * costs.std() / np.sqrt(eps) - span)
    hi = float(costs.max())
    beta, value = _golden_min(dual, lo, hi, inner_tol)
    t = np.maximum(costs - beta, 0.0)
    alpha = 0.5 * np.sqrt(np.mean(t**2) / (1.0 + eps))
    if alpha <= 1e-12 * (1.0 + span):
        raise DualDegenerate("dual multiplier collapsed to zero with eps > 0")
    weights = t / (2.0 * alpha * n)
    return value, weights, float(alpha), float(beta)


def fit_chi2_dro(
    cost: CostModel,
    rule: DecisionRule,
    data: Dataset,
    dro: DroSettings,
    settings: SolverSettings = SolverSettings(),
    theta0: Optional[np.ndarray] = None,
) -> FittedPolicy:
    """Fit the distributionally robust policy over the chi-square ball.

    The outer parameter is driven by damped Newton steps on the worst-case
    objective (gradient exact via the dual weights, Hessian approximated
    by the weight-averaged cost Hessian); the inner two-variable dual is
    solved to ``dro.inner_tol`` at every evaluation.  The KKT residual of
    the final iterate is recorded in the diagnostics.
    """
    n = data.n
    eps = dro.rho / n

    def h_vals(theta):
        return np.asarray(cost.value(rule.decide(theta), data.samples), dtype=float)

    def worst(theta):
        return chi2_worst_case(h_vals(theta), eps, dro.inner_tol)

    if theta0 is None:
        theta0 = np.zeros(rule.dim_theta)
    theta = np.atleast_1d(np.asarray(theta0, dtype=float)).copy()
    if eps == 0.0:
        return newton_minimize(
            lambda t: float(h_vals(t).mean()),
            lambda t: np.asarray(cost.grad_theta(t, data.samples), dtype=float).mean(axis=0),
            lambda t: np.asarray(cost.hess_theta(t, data.samples), dtype=float).mean(axis=0),
            theta,
            settings,
            rule=rule,
            fit_method="DRE2E",
        )

    value_cur, weights, alpha, beta = worst(theta)
    for iteration in range(settings.max_iter):
        grads = np.asarray(cost.grad_theta(theta, data.samples), dtype=float)
        outer_grad = grads.T @ weights
        gnorm = float(np.linalg.norm(outer_grad))
        if gnorm <= settings.tol:
            diag = FitDiagnostics(iterations=iteration, grad_norm=gnorm, tol=settings.tol)
            policy = FittedPolicy(theta, rule, "DRE2E", diag)
            return policy
        hess = np.asarray(cost.hess_theta(theta, data.samples), dtype=float)
        outer_hess = np.einsum("i,ijk->jk", weights, hess)
        step = _floored_solve(outer_hess, outer_grad, settings.hessian_floor)
        t = 1.0
        slope = float(outer_grad @ step)
        for _ in range(80):
            cand = theta - t * step
            cand_value, cand_weights, alpha, beta = worst(cand)
            if cand_value <= value_cur - settings.sufficient_decrease * t * slope:
                break
            t *= settings.line_shrink
        else:
            raise AscentDetected(f"no decrease in worst-case objective at iter {iteration}")
        theta, value_cur, weights = cand, cand_value, cand_weights
    raise MaxIterExceeded(
        f"worst-case gradient norm {gnorm:.3e} > tol after {settings.max_iter} iterations"
    )


def fit_constrained(
    cost: CostModel,
    rule: DecisionRule,
    constraints: Sequence[Constraint],
    data: Dataset,
    settings: SolverSettings = SolverSettings(),
    theta0: Optional[np.ndarray] = None,
    active_tol: float = 1e-8,
) -> FittedPolicy:
    """Fit an empirical-risk policy under inequality constraints g_j <= 0.

    An SLSQP pass locates the solution; a null-space Newton polish on the
    identified active set then drives the KKT residual below
    ``settings.tol``.  Multipliers come from least squares on the active
    gradients; a negative multiplier drops its constraint and re-polishes.

    Raises:
        InfeasibleStart: theta0 violates a constraint.
        KKTFailure: no KKT point could be certified.
    """
    if theta0 is None:
        theta0 = np.zeros(rule.dim_theta)
    theta0 = np.atleast_1d(np.asarray(theta0, dtype=float))
    if any(float(g.value(theta0)) > 1e-12 for g in constraints):
        raise InfeasibleStart("starting point violates a constraint")

    def obj(theta):
        return float(np.mean(cost.value(rule.decide(theta), data.samples)))

    def obj_grad(theta):
        return np.asarray(cost.grad_theta(theta, data.samples), dtype=float).mean(axis=0)

    def obj_hess(theta):
        return np.asarray(cost.hess_theta(theta, data.samples), dtype=float).mean(axis=0)

    scipy_cons = [
        {
            "type": "ineq",
            "fun": (lambda t, g=g: -float(g.value(t))),
            "jac": (lambda t, g=g: -np.asarray(g.grad(t), dtype=float)),
        }
        for g in constraints
    ]
    res = sciopt.minimize(
        obj, theta0, jac=obj_grad, constraints=scipy_cons, method="SLSQP",
        options={"maxiter": 500, "ftol": 1e-14},
    )
    theta = np.asarray(res.x, dtype=float)

    active = [
        j for j, g in enumerate(constraints) if float(g.value(theta)) > -max(1e-6, active_tol)
    ]
    multipliers = np.zeros(len(constraints))
    for _ in range(len(constraints) + 1):
        theta, mults, kkt = _polish_active_set(
            obj_grad, obj_hess, constraints, active, theta, settings
        )
        multipliers = np.zeros(len(constraints))
        for j, a in zip(active, mults):
            multipliers[j] = a
        if active and multipliers[active].min() < -1e-8:
            active = [j for j in active if multipliers[j] >= -1e-8]
            continue
        break
    feas = max((float(g.value(theta)) for g in constraints), default=0.0)
    slack = max(
        (abs(multipliers[j] * float(constraints[j].value(theta))) for j in range(len(constraints))),
        default=0.0,
    )
    if kkt > settings.tol or feas > active_tol or slack > max(settings.tol, 1e-10):
        raise KKTFailure(
            f"KKT residual {kkt:.3e}, feasibility {feas:.3e}, slackness {slack:.3e}"
        )
    final_active = tuple(
        j for j, g in enumerate(constraints) if abs(float(g.value(theta))) <= active_tol
    )
    diag = FitDiagnostics(
        iterations=int(res.nit),
        grad_norm=float(kkt),
        tol=settings.tol,
        active_set=final_active,
        multipliers=tuple(multipliers),
    )
    return FittedPolicy(theta, rule, "Constrained", diag)


def _polish_active_set(obj_grad, obj_hess, constraints, active, theta, settings):
    """Newton on the KKT system of the equality-constrained subproblem."""
    d = len(theta)
    for _ in range(settings.max_iter):
        g = obj_grad(theta)
        if active:
            c_rows = np.vstack([np.asarray(constraints[j].grad(theta), dtype=float) for j in active])
            g_vals = np.array([float(constraints[j].value(theta)) for j in active])
            mults, *_ = np.linalg.lstsq(c_rows.T, -g, rcond=None)
            kkt = float(np.linalg.norm(g + c_rows.T @ mults)) + float(np.abs(g_vals).max())
        else:
            c_rows = np.zeros((0, d))
            g_vals = np.zeros(0)
            mults = np.zeros(0)
            kkt = float(np.linalg.norm(g))
        if kkt <= 0.5 * settings.tol:
            return theta, mults, kkt
        h = obj_hess(theta)
        for idx, j in enumerate(active):
            h = h + mults[idx] * constraints[j].hess_at(theta)
        k = len(active)
        kkt_mat = np.zeros((d + k, d + k))
        kkt_mat[:d, :d] = h + settings.hessian_floor * np.eye(d)
        if k:
            kkt_mat[:d, d:] = c_rows.T
            kkt_mat[d:, :d] = c_rows
        rhs = np.concatenate([-(g + (c_rows.T @ mults if k else 0.0)), -g_vals])
        try:
            sol = np.linalg.solve(kkt_mat, rhs)
        except np.linalg.LinAlgError as exc:
            raise KKTFailure(f"singular KKT system: {exc}") from exc
        theta = theta + sol[:d]
    g = obj_grad(theta)
    if active:
        c_rows = np.vstack([np.asarray(constraints[j].grad(theta), dtype=float) for j in active])
        mults, *_ = np.linalg.lstsq(c_rows.T, -g, rcond=None)
        kkt = float(np.linalg.norm(g + c_rows.T @ mults))
    else:
        mults = np.zeros(0)
        kkt = float(np.linalg.norm(g))
    return theta, mults, kkt


def implicit_decision_jacobian(
    expected_cost_x: Callable,
    theta_hat: np.ndarray,
    x_hat: Optional[np.ndarray] = None,
    settings: SolverSettings = SolverSettings(),
    fd_step: float = 1e-5,
    second_order: bool = False,
    condition_cap: float = 1e12,
):
    """Jacobian of the inner argmin x*(theta) via the implicit function rule.

    The first-order condition f(theta, x) = grad_x E_{P_theta}[h(x; .)] = 0
    is differentiated: dx/dtheta = -f_x^{-1} f_theta, with f and its
    derivatives taken by central finite differences of the expected cost.

    Args:
        expected_cost_x: callable (theta, x) -> scalar expected cost under
            P_theta at raw decision x, or an object exposing it as the
            attribute ``expected_cost_x``.
        theta_hat: distribution parameter at which to differentiate.
        x_hat: inner optimum; solved by Newton on FD derivatives if absent.
        second_order: also return d2x/dtheta2 (scalar decisions only).

    Returns:
        (D_x, D_theta) Jacobian, or (jacobian, second) when second_order.

    Raises:
        SingularInnerHessian: f_x is not invertible at the optimum.
    """
    if not callable(expected_cost_x):
        expected_cost_x = expected_cost_x.expected_cost_x
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    d_th = len(theta_hat)

    def cost_at(theta, x):
        return float(expected_cost_x(theta, np.atleast_1d(x)))

    def grad_x(theta, x):
        x = np.atleast_1d(np.asarray(x, dtype=float))
        out = np.empty(len(x))
        for i in range(len(x)):
            e = np.zeros(len(x))
            e[i] = fd_step * (1.0 + abs(x[i]))
            out[i] = (cost_at(theta, x + e) - cost_at(theta, x - e)) / (2.0 * e[i])
        return out

    if x_hat is None:
        guess = np.zeros(1)
        res = sciopt.minimize(lambda x: cost_at(theta_hat, x), guess, method="Nelder-Mead")
        x_hat = np.atleast_1d(res.x)
    x_hat = np.atleast_1d(np.asarray(x_hat, dtype=float))
    d_x = len(x_hat)

    def fvec(theta, x):
        return grad_x(theta, x)

    f_x = np.empty((d_x, d_x))
    for i in range(d_x):
        e = np.zeros(d_x)
        e[i] = fd_step * (1.0 + abs(x_hat[i]))
        f_x[:, i] = (fvec(theta_hat, x_hat + e) - fvec(theta_hat, x_hat - e)) / (2.0 * e[i])
    f_th = np.empty((d_x, d_th))
    for k in range(d_th):
        e = np.zeros(d_th)
        e[k] = fd_step * (1.0 + abs(theta_hat[k]))
        f_th[:, k] = (fvec(theta_hat + e, x_hat) - fvec(theta_hat - e, x_hat)) / (2.0 * e[k])
    s = np.linalg.svd(f_x, compute_uv=False)
    if s[-1] == 0.0 or s[0] / s[-1] > condition_cap:
        raise SingularInnerHessian("inner optimality system is singular")
    jac = -np.linalg.solve(f_x, f_th)
    if not second_order:
        return jac
    if d_x != 1:
        raise NotImplementedError("second derivatives implemented for scalar decisions only")

    def f_scalar(theta, x):
        return float(fvec(theta, np.atleast_1d(x))[0])

    fx = float(f_x[0, 0])
    fth = f_th[0]
    step_x = fd_step * (1.0 + abs(x_hat[0]))
    fxx = (
        f_scalar(theta_hat, x_hat[0] + step_x)
        - 2.0 * f_scalar(theta_hat, x_hat[0])
        + f_scalar(theta_hat, x_hat[0] - step_x)
    ) / step_x**2
    fthth = np.empty((d_th, d_th))
    fxth = np.empty(d_th)
    for k in range(d_th):
        ek = np.zeros(d_th)
        ek[k] = fd_step * (1.0 + abs(theta_hat[k]))
        fxth[k] = (
            f_scalar(theta_hat + ek, x_hat[0] + step_x)
            - f_scalar(theta_hat + ek, x_hat[0] - step_x)
            - f_scalar(theta_hat - ek, x_hat[0] + step_x)
            + f_scalar(theta_hat - ek, x_hat[0] - step_x)
        ) / (4.0 * ek[k] * step_x)
        for j in range(k, d_th):
            ej = np.zeros(d_th)
            ej[j] = fd_step * (1.0 + abs(theta_hat[j]))
            if j == k:
                val = (
                    f_scalar(theta_hat + ek, x_hat[0])
                    - 2.0 * f_scalar(theta_hat, x_hat[0])
                    + f_scalar(theta_hat - ek, x_hat[0])
                ) / ek[k] ** 2
            else:
                val = (
                    f_scalar(theta_hat + ek + ej, x_hat[0])
                    - f_scalar(theta_hat + ek - ej, x_hat[0])
                    - f_scalar(theta_hat - ek + ej, x_hat[0])
                    + f_scalar(theta_hat - ek - ej, x_hat[0])
                ) / (4.0 * ek[k] * ej[j])
            fthth[k, j] = fthth[j, k] = val
    second = (
        -(fx**2) * fthth
        + fx * (np.outer(fth, fxth) + np.outer(fxth, fth))
        - fxx * np.outer(fth, fth)
    ) / fx**3
    return jac, second


_KERNELS = {
    "epanechnikov": (
        lambda t: 0.75 * (1.0 - t**2),
        lambda t: -1.5 * t,
    ),
    "box": (
        lambda t: 0.5 * np.ones_like(t),
        None,
    ),
}


@dataclass(frozen=True)
class SmoothedLink:
    """Kernel-smoothed scalar link with derivatives, vectorized over z."""

    value: Callable
    deriv: Callable
    second_deriv: Callable
    m: float


def _simpson_unit(points: int):
    """Nodes on [0, 1] and composite-Simpson weights (unit interval)."""
    if points % 2 == 0:
        points += 1
    s = np.linspace(0.0, 1.0, points)
    w = np.full(points, 2.0)
    w[1::2] = 4.0
    w[0] = w[-1] = 1.0
    w *= (s[1] - s[0]) / 3.0
    return s, w


def smooth_link(
    link_value: Callable,
    link_deriv: Callable,
    m: float,
    kernel: str = "epanechnikov",
    n_quad: int = 201,
    kinks=(0.0,),
) -> SmoothedLink:
    """Smooth a piecewise link by mollification at inverse bandwidth m.

    ``f_m(z) = m * integral f(u) phi(m (z - u)) du`` and its first two
    derivatives.  The composite-Simpson rule is split at the images of the
    link's kink points so every segment's integrand is smooth; the
    resulting functions are continuous in z (a single fixed grid would
    turn the derivative into a staircase).  ``link_deriv`` supplies the
    a.e. derivative of the link; the second derivative of f_m moves one
    derivative onto the kernel, capturing kink curvature without link
    second derivatives.
    """
    phi, dphi = _KERNELS[kernel]
    kinks = np.sort(np.asarray(kinks, dtype=float))
    per_segment = max(11, (n_quad // (len(kinks) + 1)) | 1)
    s_nodes, s_weights = _simpson_unit(per_segment)

    def _breaks(z):
        # t-space breakpoints per z: kernel support edges plus kink images
        z = np.asarray(z, dtype=float)
        images = np.clip(m * (z[..., None] - kinks), -1.0, 1.0)
        edges = np.concatenate(
            [np.full(z.shape + (1,), -1.0), images, np.full(z.shape + (1,), 1.0)],
            axis=-1,
        )
        return np.sort(edges, axis=-1)

    def _integrate(z, integrand, kernel_fn):
        z = np.asarray(z, dtype=float)
        edges = _breaks(z)
        a = edges[..., :-1]
        length = edges[..., 1:] - a
        # shrink segments infinitesimally so no node sits exactly on a kink
        # image, where the link's convention value would pollute the rule
        a = a + 1e-14 * length
        length = length * (1.0 - 2e-14)
        t = a[..., None] + length[..., None] * s_nodes  # (..., seg, S)
        vals = integrand(z[..., None, None] - t / m) * kernel_fn(t)
        return np.einsum("...ks,s,...k->...", vals, s_weights, length)

    def value(z):
        return _integrate(z, link_value, phi)

    def deriv(z):
        return _integrate(z, link_deriv, phi)

    def second_deriv(z):
        if dphi is None:
            raise ValueError(f"kernel {kernel!r} has no smooth derivative")
        return m * _integrate(z, link_deriv, dphi)

    return SmoothedLink(value=value, deriv=deriv, second_deriv=second_deriv, m=float(m))


def smooth_cost(
    link_value: Callable,
    link_deriv: Callable,
    m: float,
    kernel: str = "epanechnikov",
    n_quad: int = 201,
) -> CostModel:
    """Smoothed cost model for the scalar translation family h(x; xi) = f(x - xi).

    Returns a smooth CostModel over a scalar decision parameter with the
    identity rule; use :func:`smooth_link` directly to compose smoothed
    links with richer decision maps.
    """
    link = smooth_link(link_value, link_deriv, m, kernel, n_quad)

    def value(x, samples):
        samples = np.asarray(samples, dtype=float).reshape(-1)
        x = np.asarray(x, dtype=float).reshape(-1)[0] if np.ndim(x) else float(x)
        return link.value(x - samples)

    def grad_theta(theta, samples, covariates=None):
        samples = np.asarray(samples, dtype=float).reshape(-1)
        t = np.atleast_1d(np.asarray(theta, dtype=float))[0]
        return link.deriv(t - samples)[:, None]

    def hess_theta(theta, samples, covariates=None):
        samples = np.asarray(samples, dtype=float).reshape(-1)
        t = np.atleast_1d(np.asarray(theta, dtype=float))[0]
        return link.second_deriv(t - samples)[:, None, None]

    return CostModel(value=value, grad_theta=grad_theta, hess_theta=hess_theta, smoothness="smooth")


@dataclass(frozen=True)
class KernelDensity:
    """Gaussian kernel density estimate over a 1-D sample."""

    points: np.ndarray
    bandwidth: float

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        z = (x[..., None] - self.points) / self.bandwidth
        dens = np.exp(-0.5 * z**2).sum(axis=-1)
        dens /= len(self.points) * self.bandwidth * np.sqrt(2.0 * np.pi)
        return dens if dens.ndim else float(dens)


def kde(values: np.ndarray, bandwidth="silverman") -> KernelDensity:
    """Kernel density estimate with Silverman's bandwidth by default.

    Raises:
        DegenerateSample: zero-variance input.
    """
    values = np.asarray(values, dtype=float).reshape(-1)
    if len(values) < 2:
        raise DegenerateSample("need at least two points for a density estimate")
    std = values.std(ddof=1)
    if std <= 1e-15 * (1.0 + np.abs(values).max()):
        raise DegenerateSample("sample has zero variance")
    if bandwidth == "silverman":
        q75, q25 = np.percentile(values, [75, 25])
        iqr = q75 - q25
        spread = min(std, iqr / 1.34) if iqr > 0 else std
        bandwidth = 0.9 * spread * len(values) ** (-0.2)
    return KernelDensity(points=values.copy(), bandwidth=float(bandwidth))
