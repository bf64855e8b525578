"""Per-sample influence estimates for each supported estimation procedure.

An influence row measures how much one observation moved the fitted
parameter; the sandwich covariance is the empirical second moment of the
rows.  Every constructor returns an :class:`InfluenceEstimate` whose rows
align one-to-one with the dataset rows that produced the fit.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional, Sequence

import numpy as np

from .core import CostModel, Dataset
from .errors import (
    LICQViolation,
    NegativeMultiplier,
    NotAtOptimum,
    SingularDesign,
    SingularHessian,
    SingularJacobian,
)

EIG_FLOOR_RATIO = 1e-12
ACTIVE_TOL = 1e-8
LICQ_RANK_TOL = 1e-10


@dataclass(frozen=True)
class InfluenceEstimate:
    """Per-sample influence rows plus the sandwich covariance.

    Attributes:
        per_sample: (n, D_theta) matrix; row i is the estimated influence
            of observation i on the fitted parameter.
        psi_hat: (D_theta, D_theta) matrix (1/n) sum of row outer products.
        source: which construction produced the rows.
        conditioning: condition number of the matrix inverted on the way.
    """

    per_sample: np.ndarray
    psi_hat: np.ndarray
    source: str
    conditioning: float = 1.0

    @property
    def n(self) -> int:
        return self.per_sample.shape[0]

    @property
    def dim_theta(self) -> int:
        return self.per_sample.shape[1]


def _finish(rows: np.ndarray, source: str, conditioning: float) -> InfluenceEstimate:
    rows = np.atleast_2d(np.asarray(rows, dtype=float))
    psi_hat = rows.T @ rows / rows.shape[0]
    return InfluenceEstimate(rows, psi_hat, source, float(conditioning))


def sym_pinv(matrix: np.ndarray, floor_ratio: float = EIG_FLOOR_RATIO):
    """Deterministic symmetric pseudo-inverse.

    Eigenvalues with magnitude below ``floor_ratio`` times the largest are
    treated as exact zeros.  Returns (pseudo-inverse, condition number of
    the retained spectrum).
    """
    matrix = 0.5 * (matrix + matrix.T)
    w, v = np.linalg.eigh(matrix)
    scale = np.abs(w).max() if w.size else 0.0
    if scale == 0.0:
        return np.zeros_like(matrix), np.inf
    keep = np.abs(w) > floor_ratio * scale
    winv = np.where(keep, 1.0 / np.where(keep, w, 1.0), 0.0)
    cond = scale / np.abs(w[keep]).min() if keep.any() else np.inf
    return (v * winv) @ v.T, float(cond)


def _checked_inverse(matrix: np.ndarray, cap: float, error):
    """Invert a square matrix, raising ``error`` past the condition cap."""
    s = np.linalg.svd(matrix, compute_uv=False)
    cond = np.inf if s[-1] == 0.0 else float(s[0] / s[-1])
    if not np.isfinite(cond) or cond > cap:
        raise error(f"condition number {cond:.3e} exceeds cap {cap:.1e}")
    return np.linalg.inv(matrix), cond


def if_m_estimator(
    psi: Callable,
    grad_psi: Callable,
    theta_hat: np.ndarray,
    data: Dataset,
    condition_cap: float = 1e10,
    source: str = "MEstimator",
) -> InfluenceEstimate:
    """Influence rows for the root of an estimating equation.

    Args:
        psi: callable (theta, samples) -> (n, D_theta) estimating-equation
            values per sample.
        grad_psi: callable (theta, samples) -> (n, D_theta, D_theta)
            per-sample Jacobians of psi in theta.
        theta_hat: the fitted root of the averaged equation.
        data: the fitting dataset.
        condition_cap: raise SingularJacobian beyond this condition number.

    Returns:
        InfluenceEstimate with rows -(mean grad_psi)^{-1} psi_i.
    """
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    psi_rows = np.atleast_2d(np.asarray(psi(theta_hat, data.samples), dtype=float))
    jac = np.asarray(grad_psi(theta_hat, data.samples), dtype=float).mean(axis=0)
    jac_inv, cond = _checked_inverse(jac, condition_cap, SingularJacobian)
    rows = -psi_rows @ jac_inv.T
    return _finish(rows, source, cond)


def mean_variance_influence(data: Dataset) -> InfluenceEstimate:
    """Influence rows for per-margin sample means and (divisor-n) variances.

    Parameter layout: (mu_1..mu_d, sigma2_1..sigma2_d).  Rows are
    (xi - mu_hat, (xi - mu_hat)^2 - sigma2_hat) per margin, which is the
    m-estimator formula specialized to the moment equations.
    """
    x = data.samples
    mu = x.mean(axis=0)
    centered = x - mu
    sg2 = (centered**2).mean(axis=0)
    rows = np.column_stack([centered, centered**2 - sg2])
    return _finish(rows, "MeanVariance", 1.0)


def if_e2e(
    cost: CostModel,
    theta_hat: np.ndarray,
    data: Dataset,
    solver_tol: float = 1e-8,
    condition_cap: float = 1e10,
) -> InfluenceEstimate:
    """Influence rows for an empirical-risk fit: -(mean Hessian)^{-1} grad_i.

    Raises:
        NotAtOptimum: if the averaged gradient norm exceeds ten times the
            fitting solver's tolerance (the formula is only valid at a
            stationary point).
        SingularHessian: if the averaged Hessian is not invertible.
    """
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    grads = np.atleast_2d(
        np.asarray(cost.grad_theta(theta_hat, data.samples, data.covariates), dtype=float)
    )
    mean_grad = grads.mean(axis=0)
    guard = 10.0 * solver_tol
    if np.linalg.norm(mean_grad) > guard:
        raise NotAtOptimum(
            f"averaged gradient norm {np.linalg.norm(mean_grad):.3e} exceeds {guard:.1e}; refit first"
        )
    hess = np.asarray(cost.hess_theta(theta_hat, data.samples, data.covariates), dtype=float)
    i_hat = hess.mean(axis=0)
    i_inv, cond = _checked_inverse(i_hat, condition_cap, SingularHessian)
    rows = -grads @ i_inv.T
    return _finish(rows, "E2E", cond)


@dataclass(frozen=True)
class Constraint:
    """One inequality constraint g(theta) <= 0 with derivatives."""

    value: Callable
    grad: Callable
    hess: Optional[Callable] = None

    def hess_at(self, theta: np.ndarray) -> np.ndarray:
        if self.hess is None:
            d = len(np.atleast_1d(theta))
            return np.zeros((d, d))
        return np.asarray(self.hess(theta), dtype=float)


def active_set_projection(constraints: Sequence[Constraint], theta_hat, active):
    """Projector onto the tangent space of the active constraints.

    Returns (P, C) where C stacks active-constraint gradients as rows and
    P = I - C^T (C C^T)^+ C.  Raises LICQViolation if C is rank deficient.
    """
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    d = len(theta_hat)
    if not active:
        return np.eye(d), np.zeros((0, d))
    c_rows = np.vstack([np.asarray(constraints[j].grad(theta_hat), dtype=float) for j in active])
    s = np.linalg.svd(c_rows, compute_uv=False)
    if s.min() <= LICQ_RANK_TOL * max(s.max(), 1.0):
        raise LICQViolation("active-constraint gradients are linearly dependent")
    gram_inv, _ = sym_pinv(c_rows @ c_rows.T)
    proj = np.eye(d) - c_rows.T @ gram_inv @ c_rows
    return proj, c_rows


def if_constrained(
    cost: CostModel,
    constraints: Sequence[Constraint],
    theta_hat: np.ndarray,
    multipliers: np.ndarray,
    data: Dataset,
    active_tol: float = ACTIVE_TOL,
) -> InfluenceEstimate:
    """Influence rows for a fit with binding inequality constraints.

    The rows are -P (I_{h,alpha})^+ P grad_i with P the projector onto the
    tangent space of the active set and I_{h,alpha} the multiplier-weighted
    curvature; by construction they lie in the tangent space.

    Raises:
        LICQViolation: active-constraint gradients rank deficient.
        NegativeMultiplier: a multiplier below -1e-8 on the active set.
    """
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    multipliers = np.asarray(multipliers, dtype=float)
    active = [
        j for j, g in enumerate(constraints) if abs(float(g.value(theta_hat))) <= active_tol
    ]
    if any(multipliers[j] < -1e-8 for j in active):
        raise NegativeMultiplier("negative multiplier on the active set; wrong active set")
    proj, _ = active_set_projection(constraints, theta_hat, active)
    hess = np.asarray(cost.hess_theta(theta_hat, data.samples, data.covariates), dtype=float)
    i_halpha = hess.mean(axis=0)
    for j in active:
        i_halpha = i_halpha + multipliers[j] * constraints[j].hess_at(theta_hat)
    i_pinv, cond = sym_pinv(i_halpha)
    grads = np.atleast_2d(
        np.asarray(cost.grad_theta(theta_hat, data.samples, data.covariates), dtype=float)
    )
    rows = -grads @ (proj @ i_pinv @ proj).T
    return _finish(rows, "Constrained", cond)


def if_ols(
    features: np.ndarray,
    labels: np.ndarray,
    theta_hat: np.ndarray,
    ridge_lam: float = 0.0,
    condition_cap: float = 1e10,
) -> InfluenceEstimate:
    """Influence rows for (possibly ridge-penalized) least squares.

    Rows are residual_i * Sigma^{-1} u_i with Sigma = (1/n) sum u u^T
    (plus ridge_lam * I for ridge fits, with ridge_lam the penalty per
    sample used by the fit).

    Raises:
        SingularDesign: Sigma not invertible at ridge_lam = 0.
    """
    features = np.atleast_2d(np.asarray(features, dtype=float))
    labels = np.asarray(labels, dtype=float)
    theta_hat = np.atleast_1d(np.asarray(theta_hat, dtype=float))
    n, d = features.shape
    sigma = features.T @ features / n + ridge_lam * np.eye(d)
    sigma_inv, cond = _checked_inverse(sigma, condition_cap, SingularDesign)
    residuals = labels - features @ theta_hat
    rows = residuals[:, None] * (features @ sigma_inv.T)
    return _finish(rows, "OLS", cond)


def if_ols_dataset(data: Dataset, theta_hat, ridge_lam: float = 0.0) -> InfluenceEstimate:
    """if_ols on a dataset whose label column marks the outcome."""
    features, labels = data.features_labels()
    return if_ols(features, labels, theta_hat, ridge_lam)


def sandwich_covariance(estimate: InfluenceEstimate) -> np.ndarray:
    """Empirical sandwich covariance (1/n) sum IF_i IF_i^T."""
    rows = estimate.per_sample
    return rows.T @ rows / rows.shape[0]
