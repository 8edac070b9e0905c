"""Fisher-Rao flow of a factorizable payoff on the independence model.

For a payoff ``c = sum_i c_i(x_i)`` the joint flow from a product measure
stays a product measure and its factors follow the per-player flows
``m_i(t) ∝ m_i(0) exp(t c_i)``.
"""
import logging

import numpy as np
from scipy.special import softmax

from flow.central_path import closed_form_simplex_flow
from frflow.exceptions import DimensionMismatch, NumericalBlowup
from measures.divergences import tv_distance
from measures.models import Distribution

from .factorization import check_joint_size
from .models import IndependenceState

logger = logging.getLogger(__name__)


def _initial_state(fc, initial):
    if initial is None:
        return IndependenceState.uniform(fc.num_players, fc.num_actions)
    if initial.num_players != fc.num_players or initial.factors[0].size != fc.num_actions:
        raise DimensionMismatch("initial factors do not match the payoff")
    return initial


def closed_form_factors(fc, t, initial=None):
    initial = _initial_state(fc, initial)
    return IndependenceState(tuple(
        Distribution(softmax(np.log(m.weights) + t * c)) for m, c in zip(initial.factors, fc.factors)
    ))


def closed_form_product_flow(fc, t, initial=None):
    """``mu_t ∝ mu_0 exp(t c)`` on ``X^n``, evaluated factor-wise and tensored.

    A non-uniform ``initial`` is an extension of the uniform-start formula.
    """
    check_joint_size(fc.num_players, fc.num_actions)
    return closed_form_factors(fc, t, initial).joint()


def joint_exponential_flow(fc, t, initial=None):
    """The same flow computed directly on the joint outcomes."""
    check_joint_size(fc.num_players, fc.num_actions)
    return closed_form_simplex_flow(fc.flat(), _initial_state(fc, initial).joint(), t)


def _factor_natural_gradient(m, c, rcond):
    # categorical Fisher matrix of a softmax factor
    fisher = np.diag(m) - np.outer(m, m)
    return np.linalg.pinv(fisher, rcond=rcond, hermitian=True) @ (fisher @ c)


def simulate_factor_flow(fc, theta0=None, stepsize=1e-3, iters=1000, *, rcond=1e-10, blowup_threshold=1e8):
    """Euler steps of the per-player softmax natural gradient; states at ``t = stepsize * k``."""
    theta = np.zeros(fc.factors.shape) if theta0 is None else np.array(theta0, dtype=float)
    if theta.shape != fc.factors.shape:
        raise DimensionMismatch(f"theta of shape {theta.shape} for factors of shape {fc.factors.shape}")

    states = []
    for k in range(iters + 1):
        policies = softmax(theta, axis=1)
        states.append(IndependenceState(tuple(policies)))
        if k == iters:
            break
        theta = theta + stepsize * np.vstack([
            _factor_natural_gradient(m, c, rcond) for m, c in zip(policies, fc.factors)
        ])
        if np.max(np.abs(theta)) > blowup_threshold:
            logger.error("factor parameters blew up at step %d", k + 1)
            raise NumericalBlowup(f"|theta| exceeded {blowup_threshold:g} at step {k + 1}", iteration=k + 1)
    return states


def factor_flow_deviation(fc, theta0=None, stepsize=1e-3, iters=1000):
    """``(t, TV)`` between the simulated product and the closed form at every step."""
    initial = None if theta0 is None else IndependenceState(tuple(softmax(np.asarray(theta0, dtype=float), axis=1)))
    rows = []
    for k, state in enumerate(simulate_factor_flow(fc, theta0, stepsize, iters)):
        t = stepsize * k
        rows.append((t, tv_distance(state.joint(), closed_form_product_flow(fc, t, initial))))
    return rows
