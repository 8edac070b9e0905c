"""Occupancy derivatives, Fisher preconditioners and compatible function approximation.

Both preconditioners are handled through a square-root factor ``B`` with
``G = B^T B`` and a target ``z`` with ``grad R = B^T z``, so the natural
gradient ``G^+ grad R`` is the minimum-norm least-squares solution of
``B w = z``. Singular values of ``B`` are truncated, not eigenvalues of ``G``.
"""
from dataclasses import dataclass

import numpy as np

from flow.central_path import fisher_rao_gradient
from frflow.exceptions import ExplorationViolation
from mdp_core.models import StateActionDistribution
from mdp_core.occupancy import state_action_lp, state_occupancy
from mdp_core.values import policy_values, q_values
from measures.divergences import fisher_rao_norm
from measures.models import TangentVector

from .models import KAKADE, STATE_ACTION, CompatibleFit
from .parametrizations import policy_and_jacobian


@dataclass(frozen=True, eq=False)
class Differentials:
    policy: object
    policy_jacobian: np.ndarray
    state_occupancy: np.ndarray
    occupancy: StateActionDistribution
    # d d(s, a) / d theta, rows in state-major order
    jacobian: np.ndarray


def differentiate(mdp, par, theta):
    pi, dpi = policy_and_jacobian(par, theta)
    rho = state_occupancy(mdp, pi)
    gamma = mdp.discount
    # rho = (1 - gamma) mu + gamma P_pi^T rho, differentiated in theta
    system = np.eye(mdp.num_states) - gamma * np.einsum("sa,sat->ts", pi.table, mdp.transition)
    source = gamma * np.einsum("s,sap,sat->tp", rho, dpi, mdp.transition)
    drho = np.linalg.solve(system, source)
    jacobian = drho[:, None, :] * pi.table[:, :, None] + rho[:, None, None] * dpi

    weights = (rho[:, None] * pi.table).ravel()
    d = StateActionDistribution(weights / weights.sum(), mdp.num_states, mdp.num_actions)
    return Differentials(pi, dpi, rho, d, jacobian.reshape(-1, par.parameter_dim))


def occupancy_jacobian(mdp, par, theta):
    return differentiate(mdp, par, theta).jacobian


def reward_gradient(mdp, par, theta, diff=None):
    diff = differentiate(mdp, par, theta) if diff is None else diff
    return diff.jacobian.T @ mdp.reward.ravel()


def _require_positive(diff):
    if not diff.occupancy.is_strictly_positive():
        raise ExplorationViolation("the Fisher matrix needs a strictly positive occupancy")


def fisher_factor(mdp, par, theta, kind, diff=None):
    """``(B, z)`` with ``G = B^T B`` and ``grad R = B^T z``."""
    diff = differentiate(mdp, par, theta) if diff is None else diff
    _require_positive(diff)
    if kind == STATE_ACTION:
        root = np.sqrt(diff.occupancy.weights)
        return diff.jacobian / root[:, None], root * mdp.reward.ravel()
    if kind == KAKADE:
        pi = diff.policy.table
        scale = np.sqrt(diff.state_occupancy[:, None] / pi)
        factor = (scale[:, :, None] * diff.policy_jacobian).reshape(-1, par.parameter_dim)
        # policy gradient theorem with normalized values
        v = policy_values(mdp, diff.policy)
        advantage = q_values(mdp, v) - v[:, None]
        target = np.sqrt(diff.state_occupancy[:, None] * pi) * advantage / (1.0 - mdp.discount)
        return factor, target.ravel()
    raise ValueError(f"unknown Fisher matrix {kind!r}")


def fisher_matrix(mdp, par, theta, kind, diff=None):
    factor, _ = fisher_factor(mdp, par, theta, kind, diff)
    matrix = factor.T @ factor
    return 0.5 * (matrix + matrix.T)


def natural_gradient(mdp, par, theta, kind, rcond, diff=None):
    """``G^+ grad R`` with singular values of ``B`` below ``rcond * max`` dropped."""
    factor, target = fisher_factor(mdp, par, theta, kind, diff)
    return np.linalg.lstsq(factor, target, rcond=rcond)[0]


def projection_residual_sq(lp, diff, direction, objective_gradient):
    """``|| grad^FR_P f(d) - J w ||^2`` in the Fisher-Rao metric at ``d``."""
    d = diff.occupancy
    target = fisher_rao_gradient(lp, d, cost=objective_gradient).components
    moved = diff.jacobian @ direction
    # columns of J sum to zero only up to roundoff
    moved = moved - moved.sum() * d.weights
    return fisher_rao_norm(TangentVector(moved - target, d)) ** 2


def compatible_fa(mdp, par, theta, objective_gradient, *, rcond=1e-10, lp=None, diff=None):
    """Minimize ``E_d[(w . grad log d(s, a) - g(s, a))^2]`` over ``w``.

    The minimizers are the solutions of ``F w = J^T g``; the minimum-norm one
    is returned together with the minimal loss and the projection residual,
    which it bounds from above.
    """
    diff = differentiate(mdp, par, theta) if diff is None else diff
    _require_positive(diff)
    g = np.asarray(objective_gradient, dtype=float).ravel()
    root = np.sqrt(diff.occupancy.weights)
    factor, target = diff.jacobian / root[:, None], root * g
    w = np.linalg.lstsq(factor, target, rcond=rcond)[0]
    eps_sq = float(np.sum((factor @ w - target) ** 2))
    lp = state_action_lp(mdp) if lp is None else lp
    return CompatibleFit(w, eps_sq, projection_residual_sq(lp, diff, w, g))
