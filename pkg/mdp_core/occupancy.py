"""Discounted state-action occupancies and the state-action polytope."""
import logging
from concurrent.futures import ThreadPoolExecutor
from functools import partial
from itertools import product

import numpy as np

from frflow.conf import frflow_setting
from frflow.exceptions import (
    DimensionMismatch,
    ExplorationViolation,
    NumericalInconsistency,
    SingularSystem,
)
from lp_geometry.models import SimplexLp

from .models import Policy, StateActionDistribution

logger = logging.getLogger(__name__)

EXPLORATION_TOL = 1e-12
FLOW_TOL = 1e-9


def _check_policy(mdp, pi):
    if pi.table.shape != (mdp.num_states, mdp.num_actions):
        raise DimensionMismatch(f"policy of shape {pi.table.shape} for {mdp!r}")


def state_transition(mdp, pi):
    """``P_pi[s, s'] = sum_a pi(a|s) P(s'|s, a)``."""
    return np.einsum("sa,sat->st", pi.table, mdp.transition)


def state_occupancy(mdp, pi):
    """Solve ``rho = (1 - gamma) mu + gamma P_pi^T rho``."""
    _check_policy(mdp, pi)
    system = np.eye(mdp.num_states) - mdp.discount * state_transition(mdp, pi).T
    try:
        rho = np.linalg.solve(system, (1.0 - mdp.discount) * mdp.initial.weights)
    except np.linalg.LinAlgError as exc:
        raise SingularSystem(f"occupancy system of {mdp!r} is singular") from exc
    return np.clip(rho, 0.0, None)


def occupancy(mdp, pi):
    rho = state_occupancy(mdp, pi)
    weights = (rho[:, None] * pi.table).ravel()
    d = StateActionDistribution(weights / weights.sum(), mdp.num_states, mdp.num_actions)
    residual = mdp.flow_residual(d)
    if residual > FLOW_TOL:
        raise NumericalInconsistency(f"occupancy violates the flow constraints by {residual:.3e}")
    return d


def reward_of(mdp, pi):
    return float(mdp.reward.ravel() @ occupancy(mdp, pi).weights)


def policy_from_occupancy(d):
    marginal = d.state_marginal
    if marginal.min() <= EXPLORATION_TOL:
        raise ExplorationViolation(f"states {np.flatnonzero(marginal <= EXPLORATION_TOL).tolist()} are never visited")
    table = d.table / marginal[:, None]
    return Policy(table / table.sum(axis=1, keepdims=True))


def uniform_policy(mdp):
    return Policy.uniform(mdp.num_states, mdp.num_actions)


def deterministic_policies(mdp):
    """Every deterministic policy, in lexicographic order of the action tuple."""
    for actions in product(range(mdp.num_actions), repeat=mdp.num_states):
        yield Policy.deterministic(actions, mdp.num_actions)


def map_deterministic_policies(mdp, function, *, threads=None):
    """``[(pi, function(mdp, pi))]`` over every deterministic policy, in enumeration order.

    The policies are independent, so they are evaluated on a thread pool.
    """
    threads = frflow_setting("THREADS") if threads is None else threads
    policies = list(deterministic_policies(mdp))
    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(zip(policies, pool.map(partial(function, mdp), policies)))


def deterministic_rewards(mdp, *, threads=None):
    return {pi.actions: reward for pi, reward in map_deterministic_policies(mdp, reward_of, threads=threads)}


def _least_visited(mdp, pi):
    return float(state_occupancy(mdp, pi).min())


def check_exploration(mdp, *, threads=None):
    """Whether every policy visits every state with positive discounted probability.

    The minimum of the state marginal over policies is attained at a
    deterministic policy, so those are the only ones checked.
    """
    if mdp.initial.is_strictly_positive():
        return True
    for pi, least in map_deterministic_policies(mdp, _least_visited, threads=threads):
        if least <= EXPLORATION_TOL:
            logger.debug("%r: %r misses a state", mdp, pi)
            return False
    return True


def state_action_lp(mdp):
    if not check_exploration(mdp):
        raise ExplorationViolation(f"{mdp!r} does not visit every state under every policy")
    lhs, rhs = mdp.flow_constraints
    return SimplexLp(mdp.reward.ravel(), lhs, rhs, name=mdp.name)
