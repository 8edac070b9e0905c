import logging

import numpy as np
from scipy.optimize import linprog

from frflow.conf import frflow_setting
from frflow.exceptions import NumericalInconsistency, TrivialProgram
from measures.divergences import kl_divergence, min_positive, tv_distance
from measures.models import Distribution
from measures.projection import information_projection

from .models import OptimalFace, RateConstants

logger = logging.getLogger(__name__)

CHAIN_TOL = 1e-9


def optimal_face(lp, vertices, *, rtol=None):
    rtol = frflow_setting("FACE_TIE_RTOL") if rtol is None else rtol
    values = vertices.values(lp.cost)
    best = float(values.max())
    members = np.flatnonzero(values >= best - rtol * max(1.0, abs(best)))
    return OptimalFace(tuple(int(i) for i in members), best, len(vertices))


def face_constraints(lp, face):
    """Affine description of ``F* = P ∩ {c.mu = v*}``."""
    return lp.constraints.stacked(lp.cost, face.optimal_value)


def face_projection(lp, face, mu0):
    """Information projection of ``mu0`` onto the optimal face."""
    return information_projection(mu0, face_constraints(lp, face))


def rate_constants(lp, vertices, mu0, face=None):
    """Exponential rate ``delta_rate``, the vertex-gap rate ``delta_lower`` and ``t0``."""
    face = optimal_face(lp, vertices) if face is None else face
    if not face.is_proper:
        raise TrivialProgram(f"every vertex of {lp!r} is optimal")

    values = vertices.values(lp.cost)
    slopes = []
    for i in face.vertex_indices:
        for j in vertices.neighbors(i):
            if j in face:
                continue
            gap = face.optimal_value - values[j]
            tv = tv_distance(vertices[i], vertices[j])
            slopes.append(gap / tv if tv > 0 else np.inf)
    if not slopes:
        raise NumericalInconsistency("the optimal face has no outgoing edge")
    delta_rate = float(min(slopes))

    outside = [j for j in range(len(vertices)) if j not in face]
    delta_lower = float(min(face.optimal_value - values[j] for j in outside))
    if delta_lower > delta_rate + CHAIN_TOL * max(1.0, delta_rate):
        raise NumericalInconsistency(f"delta_lower {delta_lower!r} exceeds delta_rate {delta_rate!r}")

    if face.is_unique:
        mu_star = vertices[face.vertex_indices[0]]
        kl0 = kl_divergence(mu_star, mu0)
        t0 = 2.0 * kl0 / (delta_rate * min_positive(mu_star))
    else:
        mu_star = face_projection(lp, face, mu0)
        kl0 = kl_divergence(mu_star, mu0)
        t0 = None

    logger.info(
        "%r: delta=%.6g, delta_lower=%.6g, face of %d vertices", lp, delta_rate, delta_lower, len(face)
    )
    return RateConstants(
        delta_rate=delta_rate,
        delta_lower=delta_lower,
        t0=t0,
        unique_optimum=face.is_unique,
        optimal_value=face.optimal_value,
        face_size=len(face),
        mu_star=mu_star,
        kl_to_start=kl0,
    )


def tv_to_face(lp, vertices, face, mu):
    """``inf {TV(nu, mu): nu in F*}`` as an LP over convex weights of face vertices."""
    members = vertices.matrix[list(face.vertex_indices)]
    k, n = members.shape
    # variables: convex weights (k), slacks s >= |members.T w - mu| (n)
    objective = np.concatenate([np.zeros(k), 0.5 * np.ones(n)])
    a_ub = np.block([[members.T, -np.eye(n)], [-members.T, -np.eye(n)]])
    b_ub = np.concatenate([mu.weights, -mu.weights])
    a_eq = np.concatenate([np.ones(k), np.zeros(n)])[None, :]
    result = linprog(objective, A_ub=a_ub, b_ub=b_ub, A_eq=a_eq, b_eq=[1.0], bounds=[(0, None)] * (k + n), method="highs")
    if result.status != 0:
        raise NumericalInconsistency(f"TV-to-face LP failed: {result.message}")
    return float(result.fun)


def outgoing_edges(vertices, face):
    return [
        vertices.matrix[j] - vertices.matrix[i]
        for i in face.vertex_indices
        for j in vertices.neighbors(i)
        if j not in face
    ]


def in_outgoing_edge_cone(lp, vertices, face, point):
    """Whether ``point = f + sum a_e e`` with ``f`` in the face and ``a_e >= 0``."""
    members = vertices.matrix[list(face.vertex_indices)]
    edges = np.array(outgoing_edges(vertices, face)).reshape(-1, lp.ground_set_size)
    k, m = members.shape[0], edges.shape[0]
    a_eq = np.vstack([
        np.hstack([members.T, edges.T]),
        np.concatenate([np.ones(k), np.zeros(m)])[None, :],
    ])
    weights = point.weights if isinstance(point, Distribution) else np.asarray(point)
    b_eq = np.concatenate([weights, [1.0]])
    result = linprog(np.zeros(k + m), A_eq=a_eq, b_eq=b_eq, bounds=[(0, None)] * (k + m), method="highs")
    return result.status == 0


def max_entropy_point(lp):
    return information_projection(Distribution.uniform(lp.ground_set_size), lp.constraints)
