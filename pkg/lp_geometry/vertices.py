"""Vertex enumeration and adjacency for polytopes inside the simplex."""
import logging
import math
from itertools import combinations

import numpy as np
from scipy.optimize import linprog

from frflow.conf import frflow_setting
from frflow.exceptions import SizeLimitExceeded
from measures.models import Distribution

from .models import VertexSet

logger = logging.getLogger(__name__)

FEASIBILITY_TOL = 1e-10
# basic solutions below this are degenerate zeros
ZERO_TOL = 1e-12
BASIS_COND_LIMIT = 1e12


def _check_budget(candidates, budget, what):
    if candidates > budget:
        raise SizeLimitExceeded(f"{what}: {candidates} candidate bases exceed the budget of {budget}")


def _basic_solutions(lhs, rhs, n, columns_iter, merge_tol):
    found = []
    for basis in columns_iter:
        basis = list(basis)
        block = lhs[:, basis]
        if np.linalg.cond(block) > BASIS_COND_LIMIT:
            continue
        x_basis = np.linalg.solve(block, rhs)
        if x_basis.min() < -FEASIBILITY_TOL:
            continue
        x = np.zeros(n)
        x[basis] = np.where(x_basis < ZERO_TOL, 0.0, x_basis)
        if np.max(np.abs(lhs @ x - rhs)) > FEASIBILITY_TOL:
            continue
        if any(np.max(np.abs(x - y)) < merge_tol for y in found):
            continue
        found.append(x)
    return found


def enumerate_vertices(lp, *, budget=None, merge_tol=None):
    """All vertices of ``P``, by exhaustive enumeration of basic feasible solutions.

    Bases are visited in lexicographic order of their column indices, which
    fixes the vertex order.
    """
    budget = frflow_setting("VERTEX_ENUMERATION_BUDGET") if budget is None else budget
    merge_tol = frflow_setting("VERTEX_MERGE_TOL") if merge_tol is None else merge_tol
    lhs, rhs = lp.equality_system
    n, rank = lp.ground_set_size, lhs.shape[0]
    _check_budget(math.comb(n, rank), budget, repr(lp))

    points = _basic_solutions(lhs, rhs, n, combinations(range(n), rank), merge_tol)
    vertices = [Distribution.from_unnormalized(x) for x in points]
    adjacency = np.zeros((len(vertices), len(vertices)), dtype=bool)
    for i, j in combinations(range(len(vertices)), 2):
        adjacency[i, j] = adjacency[j, i] = _spans_an_edge(lhs, vertices[i], vertices[j])
    logger.debug("%r: %d vertices, %d edges", lp, len(vertices), int(adjacency.sum()) // 2)
    return VertexSet(vertices, adjacency)


def minimal_face_dimension(lp, mu, nu):
    """Dimension of the smallest face of ``P`` containing both points."""
    return _face_dimension(lp.equality_system[0], mu, nu)


def _face_dimension(lhs, mu, nu):
    # the smallest face is {x in P: x_k = 0 off the joint support}
    union = np.union1d(mu.support, nu.support)
    return union.size - int(np.linalg.matrix_rank(lhs[:, union]))


def _spans_an_edge(lhs, mu, nu):
    return _face_dimension(lhs, mu, nu) == 1


def are_neighbors(lp, vertices, i, j):
    if i == j:
        return False
    return _spans_an_edge(lp.equality_system[0], vertices[i], vertices[j])


def brute_force_vertices(lp, *, merge_tol=None):
    """Vertices from every coordinate support set.

    A support ``S`` carries a vertex iff the system restricted to ``S`` has a
    unique solution; that solution is a vertex when it is non-negative.
    """
    merge_tol = frflow_setting("VERTEX_MERGE_TOL") if merge_tol is None else merge_tol
    lhs, rhs = lp.equality_system
    n = lp.ground_set_size
    found = []
    for size in range(1, n + 1):
        for support in combinations(range(n), size):
            block = lhs[:, list(support)]
            if np.linalg.matrix_rank(block) < size:
                continue
            x_support = np.linalg.lstsq(block, rhs, rcond=None)[0]
            if x_support.min() < -FEASIBILITY_TOL:
                continue
            x = np.zeros(n)
            x[list(support)] = np.where(x_support < ZERO_TOL, 0.0, x_support)
            if np.max(np.abs(lhs @ x - rhs)) > FEASIBILITY_TOL:
                continue
            if not any(np.max(np.abs(x - y)) < merge_tol for y in found):
                found.append(x)
    return [Distribution.from_unnormalized(x) for x in found]


def normal_cone_dimension(lp, vertices, i, j, tol=1e-9):
    """Dimension of ``{c: c.v_i = c.v_j = max_P c}``.

    Two vertices are neighbours iff this is ``|X| - 1``. Implicit equalities of
    the cone are found with one LP per inequality over the box ``[-1, 1]^X``.
    """
    n = lp.ground_set_size
    anchor = vertices.matrix[i]
    others = np.delete(np.arange(len(vertices)), [i, j])
    inequalities = vertices.matrix[others] - anchor
    equality = (vertices.matrix[j] - anchor)[None, :]

    implicit = [equality[0]]
    for row in inequalities:
        result = linprog(
            row, A_ub=inequalities, b_ub=np.zeros(len(inequalities)),
            A_eq=equality, b_eq=[0.0], bounds=[(-1, 1)] * n, method="highs",
        )
        # row.c <= 0 on the cone; an optimum of 0 means row.c = 0 throughout
        if result.status == 0 and result.fun > -tol:
            implicit.append(row)
    return n - int(np.linalg.matrix_rank(np.vstack(implicit), tol=tol))
