"""Information projections onto affine slices of the simplex.

Points of the form ``mu ∝ base * exp(tilt + A^T lam)`` are computed by a
damped Newton iteration on the dual variables ``lam``. The same solver backs
the central path of the flow app, where ``tilt = t * c``.
"""
import logging

import numpy as np
from scipy import linalg
from scipy.optimize import linprog
from scipy.special import softmax

from frflow.conf import frflow_setting
from frflow.exceptions import InfeasibleConstraints, InvalidDistribution, NonConvergence

from .models import AffineConstraints, Distribution

logger = logging.getLogger(__name__)

RANK_RTOL = 1e-10
CONSISTENCY_TOL = 1e-9
MIN_STEP = 2.0**-40


def _centered(lhs, rhs):
    means = lhs.mean(axis=1)
    return lhs - means[:, None], rhs - means


def independent_rows(lhs, rhs):
    """Indices of a maximal set of rows of ``lhs @ mu = rhs`` independent modulo ``sum(mu) = 1``.

    Raises ``InfeasibleConstraints`` when a dropped row contradicts the kept ones.
    """
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    if lhs.shape[0] == 0:
        return np.arange(0)

    centered, shifted = _centered(lhs, rhs)
    _, r, piv = linalg.qr(centered.T, mode="economic", pivoting=True)
    diag = np.abs(np.diag(r))
    rank = 0 if diag.size == 0 or diag[0] == 0 else int(np.sum(diag > RANK_RTOL * diag[0]))
    keep = np.sort(piv[:rank])
    drop = np.sort(piv[rank:])

    if drop.size:
        if rank:
            coef = np.linalg.lstsq(centered[keep].T, centered[drop].T, rcond=None)[0]
            implied = coef.T @ shifted[keep]
        else:
            implied = np.zeros(drop.size)
        mismatch = np.abs(shifted[drop] - implied)
        if np.any(mismatch > CONSISTENCY_TOL * (1.0 + np.abs(rhs[drop]))):
            raise InfeasibleConstraints(
                f"redundant constraint rows {drop.tolist()} contradict the others",
                mismatch=float(mismatch.max()),
            )
    return keep


def reduce_constraints(lhs, rhs):
    """Drop redundant rows of ``lhs @ mu = rhs`` given ``sum(mu) = 1``.

    Rows are centered (``a - mean(a)``) so that the returned system is
    orthogonal to the all-ones row; stacking the normalization row on top of
    it yields a matrix of full row rank.
    """
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    keep = independent_rows(lhs, rhs)
    if keep.size == 0:
        return np.zeros((0, lhs.shape[1])), np.zeros(0)
    centered, shifted = _centered(lhs[keep], rhs[keep])
    return centered, shifted


def feasible_support(lhs, rhs):
    """Largest support of a point in ``{mu in simplex: lhs @ mu = rhs}``.

    Works on the homogenized cone ``{y >= 0: lhs y = rhs * w, 1.y = w}`` and
    maximizes ``sum z`` with ``z <= y`` and ``z <= 1``. Any coordinate that can
    be positive reaches ``z = 1`` by scaling, so one LP finds the support and a
    feasible point that is positive on it.
    """
    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    m, n = lhs.shape
    # variables: y (n), w (1), z (n)
    a_eq = np.zeros((m + 1, 2 * n + 1))
    a_eq[:m, :n] = lhs
    a_eq[:m, n] = -rhs
    a_eq[m, :n] = 1.0
    a_eq[m, n] = -1.0
    a_ub = np.hstack([-np.eye(n), np.zeros((n, 1)), np.eye(n)])
    objective = np.concatenate([np.zeros(n + 1), -np.ones(n)])
    bounds = [(0, None)] * (n + 1) + [(0, 1)] * n

    result = linprog(
        objective, A_ub=a_ub, b_ub=np.zeros(n), A_eq=a_eq, b_eq=np.zeros(m + 1),
        bounds=bounds, method="highs",
    )
    if result.status != 0:
        raise InfeasibleConstraints(f"support detection failed: {result.message}")
    z = result.x[n + 1:]
    support = np.flatnonzero(z > 0.5)
    if support.size == 0:
        raise InfeasibleConstraints("no probability vector satisfies the constraints")
    y, w = result.x[:n], result.x[n]
    point = np.zeros(n)
    point[support] = y[support] / w
    return support, point / point.sum()


def dual_newton(log_weights, lhs, rhs, lam0=None, *, tol=None, max_iter=None, armijo=None):
    """Find ``lam`` with ``lhs @ softmax(log_weights + lhs.T @ lam) = rhs``.

    ``lhs`` must have full row rank and be orthogonal to the all-ones vector
    (see ``reduce_constraints``). Returns ``(weights, lam, iterations)``.
    """
    tol = frflow_setting("NEWTON_TOL") if tol is None else tol
    max_iter = frflow_setting("NEWTON_MAX_ITER") if max_iter is None else max_iter
    armijo = frflow_setting("ARMIJO") if armijo is None else armijo

    lhs = np.asarray(lhs, dtype=float)
    rhs = np.asarray(rhs, dtype=float)
    lam = np.zeros(lhs.shape[0]) if lam0 is None else np.array(lam0, dtype=float)

    def evaluate(duals):
        weights = softmax(log_weights + lhs.T @ duals)
        return weights, lhs @ weights - rhs

    mu, g = evaluate(lam)
    residual = float(np.max(np.abs(g), initial=0.0))
    for iteration in range(max_iter + 1):
        if residual <= tol:
            logger.debug("dual Newton converged in %d iterations (residual %.2e)", iteration, residual)
            return mu, lam, iteration
        if iteration == max_iter:
            break

        centered = lhs - (lhs @ mu)[:, None]
        hessian = (centered * mu) @ centered.T
        try:
            step = np.linalg.solve(hessian, -g)
        except np.linalg.LinAlgError:
            step = np.linalg.lstsq(hessian, -g, rcond=None)[0]

        merit = g @ g
        alpha = 1.0
        while True:
            candidate = lam + alpha * step
            mu_new, g_new = evaluate(candidate)
            if np.all(np.isfinite(g_new)) and g_new @ g_new <= (1.0 - 2.0 * armijo * alpha) * merit:
                break
            alpha *= 0.5
            if alpha < MIN_STEP:
                logger.warning("dual Newton backtracking hit the step floor at residual %.2e", residual)
                raise NonConvergence(
                    f"dual Newton line search found no decrease at residual {residual:.3e}",
                    residual=residual,
                    lam=lam,
                    iterations=iteration,
                )
        lam, mu, g = candidate, mu_new, g_new
        residual = float(np.max(np.abs(g)))

    raise NonConvergence(
        f"dual Newton stopped at residual {residual:.3e} after {max_iter} iterations",
        residual=residual,
    )


def information_projection(mu0, constraints, *, tol=None, max_iter=None):
    """KL projection ``argmin {KL(mu, mu0): mu in simplex, lhs @ mu = rhs}``."""
    if not mu0.is_strictly_positive():
        raise InvalidDistribution("the reference measure of a projection must be strictly positive")
    if not isinstance(constraints, AffineConstraints):
        constraints = AffineConstraints(*constraints)

    support, _ = feasible_support(constraints.lhs, constraints.rhs)
    lhs, rhs = reduce_constraints(constraints.lhs[:, support], constraints.rhs)
    restricted, _, iterations = dual_newton(np.log(mu0.weights[support]), lhs, rhs, tol=tol, max_iter=max_iter)

    weights = np.zeros(mu0.size)
    weights[support] = restricted
    logger.debug("projected onto a face with %d of %d atoms (%d Newton steps)", support.size, mu0.size, iterations)
    return Distribution.from_unnormalized(weights)
