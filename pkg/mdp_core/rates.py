import logging

import numpy as np

from frflow.exceptions import NumericalInconsistency, TrivialProgram
from lp_geometry.faces import face_projection, optimal_face, rate_constants
from lp_geometry.vertices import enumerate_vertices
from measures.divergences import tv_distance

from .models import MdpRates, Policy, StateActionDistribution
from .occupancy import deterministic_rewards, occupancy, state_action_lp, uniform_policy
from .values import optimal_values

logger = logging.getLogger(__name__)

CHAIN_TOL = 1e-9


def kakade_constant(mdp, values):
    """``-(1 - gamma)^-1 max {A*(s, a): a not optimal in s}``."""
    suboptimal = [
        values.a_star[s, a]
        for s in range(mdp.num_states)
        for a in range(mdp.num_actions)
        if a not in values.optimal_actions[s]
    ]
    if not suboptimal:
        raise TrivialProgram(f"every action of {mdp!r} is optimal")
    return -max(suboptimal) / (1.0 - mdp.discount)


def one_state_deviations(mdp, actions):
    """Deterministic policies that differ from ``actions`` in exactly one state."""
    for s in range(mdp.num_states):
        for a in range(mdp.num_actions):
            if a != actions[s]:
                changed = list(actions)
                changed[s] = a
                yield Policy.deterministic(changed, mdp.num_actions)


def mdp_rate_constants(mdp, *, lp=None, vertices=None):
    lp = state_action_lp(mdp) if lp is None else lp
    vertices = enumerate_vertices(lp) if vertices is None else vertices
    face = optimal_face(lp, vertices)
    if not face.is_proper:
        raise TrivialProgram(f"every policy of {mdp!r} is optimal")

    values = optimal_values(mdp)
    start = occupancy(mdp, uniform_policy(mdp))
    rc = rate_constants(lp, vertices, start, face=face)

    if face.is_unique:
        pi_star = values.greedy_policy
        d_star = occupancy(mdp, pi_star)
        r_star = float(lp.cost @ d_star.weights)
        slopes = []
        for pi in one_state_deviations(mdp, pi_star.actions):
            d = occupancy(mdp, pi)
            tv = tv_distance(d_star, d)
            slopes.append((r_star - float(lp.cost @ d.weights)) / tv if tv > 0 else np.inf)
        delta_rate = float(min(slopes))
    else:
        delta_rate = rc.delta_rate

    delta_kakade = kakade_constant(mdp, values)
    tol = CHAIN_TOL * max(1.0, delta_kakade)
    if not (rc.delta_lower <= delta_rate + tol and delta_rate <= delta_kakade + tol):
        raise NumericalInconsistency(
            f"rate chain violated: delta_lower={rc.delta_lower!r}, delta={delta_rate!r}, delta_K={delta_kakade!r}"
        )
    logger.info("%r: delta=%.6g delta_lower=%.6g delta_K=%.6g", mdp, delta_rate, rc.delta_lower, delta_kakade)
    return MdpRates(
        delta_rate=delta_rate,
        delta_lower=rc.delta_lower,
        delta_kakade=delta_kakade,
        unique_optimum=face.is_unique,
        optimal_value=face.optimal_value,
        t0=rc.t0,
        face_size=len(face),
        deterministic_rewards=deterministic_rewards(mdp),
    )


def optimal_occupancy(mdp, reference=None, *, lp=None, vertices=None):
    """The optimal occupancy, or the information projection of ``reference`` onto the optimal face."""
    lp = state_action_lp(mdp) if lp is None else lp
    vertices = enumerate_vertices(lp) if vertices is None else vertices
    face = optimal_face(lp, vertices)
    if face.is_unique:
        point = vertices[face.vertex_indices[0]]
    else:
        reference = occupancy(mdp, uniform_policy(mdp)) if reference is None else reference
        point = face_projection(lp, face, reference)
    return StateActionDistribution(point.weights, mdp.num_states, mdp.num_actions)
