"""Normalized values: ``V = (1 - gamma) r_pi + gamma P_pi V`` so that ``R(pi) = mu.V``."""
import logging

import numpy as np

from .models import OptimalValues, Policy
from .occupancy import occupancy, state_transition

logger = logging.getLogger(__name__)

FIXPOINT_TOL = 1e-12
TIE_RTOL = 1e-9
GREEDY_TIE = 1e-12
MAX_SWEEPS = 1_000_000


def policy_values(mdp, pi):
    rewards = np.einsum("sa,sa->s", pi.table, mdp.reward)
    system = np.eye(mdp.num_states) - mdp.discount * state_transition(mdp, pi)
    return np.linalg.solve(system, (1.0 - mdp.discount) * rewards)


def q_values(mdp, v):
    return (1.0 - mdp.discount) * mdp.reward + mdp.discount * mdp.transition @ v


def _greedy(q):
    scale = max(1.0, float(np.max(np.abs(q))))
    best = q.max(axis=1, keepdims=True)
    # lowest action index among near-ties
    return tuple(int(np.flatnonzero(row >= top - GREEDY_TIE * scale)[0]) for row, top in zip(q, best[:, 0]))


def value_iteration(mdp, tol=FIXPOINT_TOL):
    gamma = mdp.discount
    if gamma == 0:
        return mdp.reward.max(axis=1)
    threshold = (1.0 - gamma) * tol / (2.0 * gamma)
    v = np.zeros(mdp.num_states)
    for sweep in range(MAX_SWEEPS):
        v_new = q_values(mdp, v).max(axis=1)
        residual = float(np.max(np.abs(v_new - v)))
        v = v_new
        # below the threshold or at the float resolution of v
        if residual <= max(threshold, 8 * np.finfo(float).eps * np.max(np.abs(v), initial=1.0)):
            logger.debug("value iteration converged after %d sweeps", sweep + 1)
            return v
    logger.warning("value iteration stopped after %d sweeps at residual %.2e", MAX_SWEEPS, residual)
    return v


def optimal_values(mdp):
    """Optimal values, Q-values and advantages.

    Everything is on the normalized scale of this module:
    ``Q*(s, a) = (1 - gamma) r(s, a) + gamma sum_s' P(s'|s, a) V*(s')``,
    which is ``(1 - gamma)`` times the unnormalized ``r + gamma P V`` fixed
    point. Advantage gaps and the rates built from them carry the same factor.

    Value iteration supplies a greedy policy, which is then evaluated exactly
    and improved until no action has a positive advantage.
    """
    actions = _greedy(q_values(mdp, value_iteration(mdp)))
    while True:
        greedy = Policy.deterministic(actions, mdp.num_actions)
        v_star = policy_values(mdp, greedy)
        q_star = q_values(mdp, v_star)
        a_star = q_star - v_star[:, None]
        scale = TIE_RTOL * max(1.0, float(np.max(np.abs(v_star))))
        improvable = a_star.max(axis=1) > scale
        if not improvable.any():
            break
        logger.debug("policy improvement step from %s", actions)
        actions = tuple(int(np.argmax(row)) if flag else a for row, flag, a in zip(a_star, improvable, actions))

    optimal_actions = tuple(tuple(int(a) for a in np.flatnonzero(row >= -scale)) for row in a_star)
    return OptimalValues(v_star, q_star, a_star, optimal_actions, greedy)


def performance_difference(mdp, pi, values=None):
    """``R* - R(pi) = -(1 - gamma)^-1 sum_{s,a} d^pi(s, a) A*(s, a)``."""
    values = optimal_values(mdp) if values is None else values
    d = occupancy(mdp, pi)
    return -float(d.weights @ values.a_star.ravel()) / (1.0 - mdp.discount)
