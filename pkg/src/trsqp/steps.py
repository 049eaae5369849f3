"""Trial-step machinery.

The trial step splits into an orthogonal normal/tangential pair whose
lengths are controlled by a parameter-free decomposition of the trust
radius: the normal and tangential radii are proportional to the rescaled
feasibility residual and, depending on the step type, the rescaled
optimality residual or the rescaled negative curvature. The rescaling (by
the Jacobian and Hessian operator norms) makes the decomposition invariant
to a positive rescaling of the objective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import linalg
from .errors import (
    DegenerateResiduals,
    NotNegativeCurvature,
    SubsolverFailure,
    ZeroHessianNorm,
)
from .problem import Problem

__all__ = [
    "GRADIENT_STEP",
    "EIGEN_STEP",
    "RadiusSplit",
    "TrialStep",
    "rescaled_residuals",
    "split_radius",
    "normal_step",
    "tangential_gradient",
    "tangential_eigen",
    "soc_step",
    "select_step_type",
    "predicted_reduction",
    "build_trial_step",
]

GRADIENT_STEP = "gradient"
EIGEN_STEP = "eigen"

# Relative slack for a-posteriori fraction-of-Cauchy / curvature checks;
# exact subsolvers meet the bounds with equality up to roundoff.
CHECK_SLACK = 1e-10


@dataclass(frozen=True)
class RadiusSplit:
    """Normal/tangential radii with breve^2 + tilde^2 = delta^2."""

    normal: float
    tangential: float
    mode: str


@dataclass
class TrialStep:
    """A constructed trial step and its ingredients.

    ``pred`` is filled by the merit loop once the penalty parameter is
    fixed; ``soc`` is attached when a second-order correction is computed.
    """

    kind: str
    v: np.ndarray
    gamma: float
    w: np.ndarray
    u: np.ndarray
    t: np.ndarray
    dx: np.ndarray
    split: RadiusSplit
    pred: float = np.nan
    soc: np.ndarray | None = None


def rescaled_residuals(
    c: np.ndarray, G: np.ndarray, grad_l: np.ndarray, H: np.ndarray
) -> tuple[np.ndarray, np.ndarray, float]:
    """Feasibility and optimality residuals rescaled by ||G|| and ||H||.

    Returns ``(c_rs, grad_l_rs, kkt_rs_norm)`` where the last entry is the
    norm of the stacked rescaled residual.
    """
    g_norm = linalg.spectral_norm(G)
    h_norm = linalg.spectral_norm(H)
    if h_norm == 0.0:
        raise ZeroHessianNorm("Hessian approximation has zero operator norm")
    if g_norm == 0.0:
        raise ZeroHessianNorm("constraint Jacobian has zero operator norm")
    c_rs = c / g_norm
    grad_l_rs = grad_l / h_norm
    stacked = float(np.hypot(np.linalg.norm(c_rs), np.linalg.norm(grad_l_rs)))
    return c_rs, grad_l_rs, stacked


def split_radius(mode: str, delta: float, c_rs_norm: float, opt_rs: float) -> RadiusSplit:
    """Proportional radius decomposition.

    ``opt_rs`` is the rescaled optimality-residual norm in gradient mode and
    the rescaled negative curvature in eigen mode.
    """
    denom = float(np.hypot(c_rs_norm, opt_rs))
    if denom == 0.0:
        raise DegenerateResiduals(f"all-zero residuals in {mode} radius split")
    return RadiusSplit(
        normal=delta * c_rs_norm / denom,
        tangential=delta * opt_rs / denom,
        mode=mode,
    )


def normal_step(c: np.ndarray, G: np.ndarray, normal_radius: float) -> tuple[np.ndarray, float, np.ndarray]:
    """Shrunk least-norm step toward the linearized constraints.

    Returns ``(v, gamma, w)`` with w = gamma v, ||w|| <= normal_radius, and
    gamma = 1 when the pull-back vanishes.
    """
    v = linalg.min_norm_pull(G, c)
    v_norm = np.linalg.norm(v)
    if v_norm == 0.0:
        return v, 1.0, np.zeros_like(v)
    gamma = min(normal_radius / v_norm, 1.0)
    return v, gamma, gamma * v


def tangential_gradient(
    H: np.ndarray,
    grad: np.ndarray,
    w: np.ndarray,
    Z: np.ndarray,
    tangential_radius: float,
    kappa_fcd: float = 1.0,
    method: str = "auto",
) -> np.ndarray:
    """Reduced trust-region solve for the gradient-step tangential component.

    Solves min 0.5 u^T (Z^T H Z) u + (Z^T (g + H w))^T u over the tangential
    ball and verifies the fraction-of-Cauchy-decrease condition a
    posteriori.
    """
    if tangential_radius <= 0.0:
        return np.zeros(Z.shape[1])
    g_r = Z.T @ (grad + H @ w)
    H_r = Z.T @ H @ Z
    u = linalg.trs_solve(H_r, g_r, tangential_radius, method=method)
    m_u = linalg.model_value(H_r, g_r, u)
    g_r_norm = np.linalg.norm(g_r)
    h_r_norm = linalg.spectral_norm(H_r)
    curv = g_r_norm / h_r_norm if h_r_norm > 0.0 else np.inf
    rhs = -0.5 * kappa_fcd * g_r_norm * min(tangential_radius, curv)
    if m_u > rhs + CHECK_SLACK * max(1.0, abs(rhs)):
        raise SubsolverFailure(
            f"reduction {m_u:.6e} misses the Cauchy fraction bound {rhs:.6e}"
        )
    return u


def tangential_eigen(
    H: np.ndarray,
    grad: np.ndarray,
    w: np.ndarray,
    Z: np.ndarray,
    tangential_radius: float,
    tau: float,
    eigvec: np.ndarray,
) -> np.ndarray:
    """Negative-curvature tangential component.

    Scales the reduced eigenvector to the tangential radius, with the sign
    chosen to make the step a descent direction for the reduced gradient
    (ties resolved to the positive sign).
    """
    if tau >= 0.0:
        raise NotNegativeCurvature(f"eigen step requested with curvature {tau:.3e}")
    if tangential_radius <= 0.0:
        return np.zeros(Z.shape[1])
    u = eigvec * (tangential_radius / np.linalg.norm(eigvec))
    g_r = Z.T @ (grad + H @ w)
    if float(g_r @ u) > 0.0:
        u = -u
    return u


def soc_step(problem: Problem, x: np.ndarray, dx: np.ndarray, G: np.ndarray) -> np.ndarray:
    """Second-order correction cancelling the quadratic constraint remainder.

    Pulls back the remainder c(x + dx) - c(x) - G dx through the least-norm
    solve; identically zero for affine constraints.
    """
    remainder = problem.constraint(x + dx) - problem.constraint(x) - G @ dx
    return linalg.min_norm_pull(G, remainder)


def select_step_type(
    kkt_norm: float, h_norm: float, tau_plus: float, c_norm: float, delta: float
) -> str:
    """Pick the step achieving the larger model reduction.

    Gradient when ||gradL|| min{delta, ||gradL||/||H||} dominates
    tau_plus * delta * (delta + ||c||); eigen otherwise.
    """
    curv = kkt_norm / h_norm if h_norm > 0.0 else np.inf
    lhs = kkt_norm * min(delta, curv)
    rhs = tau_plus * delta * (delta + c_norm)
    return GRADIENT_STEP if lhs >= rhs else EIGEN_STEP


def predicted_reduction(
    grad: np.ndarray,
    H: np.ndarray,
    mu: float,
    c: np.ndarray,
    G: np.ndarray,
    dx: np.ndarray,
) -> float:
    """Model reduction of the penalized merit function for a step ``dx``."""
    linearized = np.linalg.norm(c + G @ dx) - np.linalg.norm(c)
    return float(grad @ dx + 0.5 * dx @ (H @ dx) + mu * linearized)


def build_trial_step(
    kind: str,
    c: np.ndarray,
    G: np.ndarray,
    Z: np.ndarray,
    grad: np.ndarray,
    H: np.ndarray,
    grad_l: np.ndarray,
    delta: float,
    tau: float | None = None,
    tau_plus: float = 0.0,
    eigvec: np.ndarray | None = None,
    kappa_fcd: float = 1.0,
    method: str = "auto",
) -> TrialStep:
    """Assemble a full trial step of the requested kind."""
    c_rs, grad_l_rs, _ = rescaled_residuals(c, G, grad_l, H)
    c_rs_norm = float(np.linalg.norm(c_rs))
    if kind == GRADIENT_STEP:
        opt_rs = float(np.linalg.norm(grad_l_rs))
    elif kind == EIGEN_STEP:
        opt_rs = tau_plus / linalg.spectral_norm(H)
    else:
        raise ValueError(f"unknown step kind {kind!r}")
    split = split_radius(kind, delta, c_rs_norm, opt_rs)
    v, gamma, w = normal_step(c, G, split.normal)
    if kind == GRADIENT_STEP:
        u = tangential_gradient(H, grad, w, Z, split.tangential, kappa_fcd, method)
    else:
        u = tangential_eigen(H, grad, w, Z, split.tangential, tau, eigvec)
    t = Z @ u
    return TrialStep(kind=kind, v=v, gamma=gamma, w=w, u=u, t=t, dx=w + t, split=split)
