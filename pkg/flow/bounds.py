"""Convergence guarantees for the flow of an LP, evaluated as closed-form expressions."""
import math

import numpy as np

from frflow.exceptions import BoundNotApplicable
from lp_geometry.faces import max_entropy_point, optimal_face
from measures.divergences import entropy, kl_divergence, min_positive
from measures.projection import information_projection

from .models import ConvergenceBounds

CHAIN_TOL = 1e-9


def sublinear_bound(kl0, t):
    if not t > 0:
        raise BoundNotApplicable(f"the sublinear bound needs t > 0, got {t!r}")
    return kl0 / t


def linear_bound_factor(delta_rate, t0, t):
    """``exp(-delta (t - t0) + 2 t0 delta log((t + t0) / (2 t0)))`` for ``t >= t0``."""
    if t < t0:
        raise BoundNotApplicable(f"the linear bound holds for t >= t0 = {t0:.6g}, got {t!r}")
    if t0 == 0:
        return math.exp(-delta_rate * t)
    return math.exp(-delta_rate * (t - t0) + 2.0 * t0 * delta_rate * math.log((t + t0) / (2.0 * t0)))


def entropic_radius(lp, vertices):
    """``max_P H - min_P H``; the minimum of a concave function is attained at a vertex."""
    return entropy(max_entropy_point(lp)) - min(entropy(v) for v in vertices)


def non_unique_bounds(kl0, delta_rate, kappa, t_kappa, t):
    """``kl0 * exp(-kappa (t - t_kappa))``; asymptotic, with a caller-supplied ``t_kappa``."""
    if not 0 < kappa < delta_rate:
        raise BoundNotApplicable(f"kappa must lie in (0, {delta_rate:.6g}), got {kappa!r}")
    if t < t_kappa:
        raise BoundNotApplicable(f"the bound holds for t >= t_kappa = {t_kappa!r}, got {t!r}")
    return kl0 * math.exp(-kappa * (t - t_kappa))


def convergence_bounds(lp, vertices, mu0, mu_star, rc, t, *, kappa=None, t_kappa=None, radius=None):
    """Every bound on the gap and on ``KL(mu_star, mu_t)`` at time ``t``.

    The regularization bounds concern the entropy-regularized LP, i.e. the
    flow started at the maximum-entropy point; they are NaN before that
    flow's own ``t0``.
    """
    kl0 = kl_divergence(mu_star, mu0)
    radius = entropic_radius(lp, vertices) if radius is None else radius
    sublinear = sublinear_bound(kl0, t)

    if not rc.unique_optimum:
        if kappa is None or t_kappa is None:
            raise BoundNotApplicable("without a unique optimum the bounds need kappa and t_kappa")
        return ConvergenceBounds(
            sublinear_bound=sublinear,
            linear_bound_kl=non_unique_bounds(kl0, rc.delta_rate, kappa, t_kappa, t),
            linear_bound_value=math.nan,
            regularization_bound_kl=non_unique_bounds(radius, rc.delta_rate, kappa, t_kappa, t),
            regularization_bound_value=math.nan,
            certified=False,
        )

    factor = linear_bound_factor(rc.delta_rate, rc.t0, t)
    t0_regularized = 2.0 * kl_divergence(mu_star, max_entropy_point(lp)) / (rc.delta_rate * min_positive(mu_star))
    if t >= t0_regularized:
        regularized_kl = radius * linear_bound_factor(rc.delta_rate, t0_regularized, t)
        regularized_value = rc.delta_rate * regularized_kl
    else:
        regularized_kl = regularized_value = math.nan
    return ConvergenceBounds(
        sublinear_bound=sublinear,
        linear_bound_kl=kl0 * factor,
        linear_bound_value=rc.delta_rate * kl0 * factor,
        regularization_bound_kl=regularized_kl,
        regularization_bound_value=regularized_value,
    )


def empirical_kappa_time(trajectory, kappa):
    """First grid time from which ``KL(mu*, mu_t) <= KL(mu*, mu0) exp(-kappa (t - t_kappa))`` on the rest of the grid."""
    kl0 = trajectory.kl[0]
    times, kl = trajectory.times, trajectory.kl
    for index, t_kappa in enumerate(times):
        envelope = kl0 * np.exp(-kappa * (times[index:] - t_kappa))
        if np.all(kl[index:] <= envelope * (1 + CHAIN_TOL) + 1e-300):
            return float(t_kappa)
    return None


def implicit_bias_limit(lp, vertices, mu0):
    """Limit of the flow: the information projection of ``mu0`` onto the optimal face."""
    face = optimal_face(lp, vertices)
    if face.is_unique:
        return vertices[face.vertex_indices[0]]
    return information_projection(mu0, lp.constraints.stacked(lp.cost, face.optimal_value))


def check_bound_chain(trajectory, tol=CHAIN_TOL):
    """Names and time indices of every violated guarantee along a trajectory."""
    violations = []

    def exceeds(measured, bound):
        with np.errstate(invalid="ignore"):
            return np.flatnonzero(measured > bound + tol * np.maximum(1.0, np.abs(bound)))

    for index in exceeds(trajectory.gap, trajectory.sublinear_bound):
        violations.append(("sublinear_bound", int(index)))
    for index in exceeds(trajectory.gap, trajectory.linear_bound_value):
        violations.append(("linear_bound_value", int(index)))
    for index in exceeds(trajectory.kl, trajectory.linear_bound_kl):
        violations.append(("linear_bound_kl", int(index)))
    for index in np.flatnonzero(np.diff(trajectory.gap) > tol):
        violations.append(("gap_monotone", int(index) + 1))
    with np.errstate(invalid="ignore"):
        for index in np.flatnonzero(np.diff(trajectory.kl) > tol):
            violations.append(("kl_monotone", int(index) + 1))
    return violations
