"""The Fisher-Rao gradient flow of an LP, computed along its central path.

The flow started at ``mu0`` passes at time ``t`` through the maximizer of
``c.mu - KL(mu, mu0) / t`` over ``P``, i.e. ``mu_t ∝ mu0 * exp(t c + A^T lam)``.
Each grid time is therefore a dual Newton solve, warm-started from the
previous one.
"""
import logging

import numpy as np
from scipy.special import softmax

from frflow.conf import frflow_setting
from frflow.exceptions import InfeasibleConstraints, InvalidDistribution, InvalidTimeGrid, NonConvergence
from lp_geometry.faces import optimal_face, rate_constants
from lp_geometry.vertices import enumerate_vertices
from measures.divergences import kl_divergence
from measures.models import Distribution, TangentVector
from measures.projection import dual_newton

from .bounds import linear_bound_factor
from .models import CentralPathConfig, FlowTrajectory

logger = logging.getLogger(__name__)

MAX_BISECTIONS = 30


def _check_start(lp, mu0):
    if mu0.size != lp.ground_set_size:
        raise InvalidDistribution(f"start of size {mu0.size} for a ground set of size {lp.ground_set_size}")
    if not mu0.is_strictly_positive():
        raise InvalidDistribution("the flow must start at a strictly positive point")
    if not lp.is_feasible(mu0):
        raise InfeasibleConstraints(f"start violates the constraints by {lp.constraints.residual(mu0):.3e}")


def _follow(lp, log_mu0, t_from, lam, t_to, cfg, depth=0):
    """Dual solve at ``t_to`` from duals valid at ``t_from``, bisecting the step on failure."""
    lhs, rhs = lp.reduced_constraints
    try:
        weights, lam, _ = dual_newton(
            log_mu0 + t_to * lp.cost, lhs, rhs, lam, tol=cfg.newton_tol, max_iter=cfg.newton_max_iter
        )
        return weights, lam
    except NonConvergence:
        if depth >= MAX_BISECTIONS:
            raise
    middle = 0.5 * (t_from + t_to)
    logger.debug("bisecting central path step [%g, %g]", t_from, t_to)
    _, lam = _follow(lp, log_mu0, t_from, lam, middle, cfg, depth + 1)
    return _follow(lp, log_mu0, middle, lam, t_to, cfg, depth + 1)


def central_path_point(lp, mu0, t, cfg=None):
    """``argmax {c.mu - KL(mu, mu0) / t : mu in P}``; ``mu0`` itself at ``t = 0``."""
    cfg = CentralPathConfig.from_settings() if cfg is None else cfg
    _check_start(lp, mu0)
    if t < 0:
        raise InvalidTimeGrid(f"negative time {t!r}")
    if t == 0:
        return mu0
    weights, _ = _follow(lp, np.log(mu0.weights), 0.0, None, float(t), cfg)
    return Distribution(weights)


def closed_form_simplex_flow(cost, mu0, t):
    """The flow on the whole simplex: ``mu_t ∝ mu0 * exp(t c)``."""
    if not mu0.is_strictly_positive():
        raise InvalidDistribution("closed form needs a strictly positive start")
    return Distribution(softmax(np.log(mu0.weights) + t * np.asarray(cost, dtype=float)))


def fisher_rao_gradient(lp, mu, cost=None):
    """Riesz representative of ``c`` in the Fisher-Rao metric at ``mu``, tangent to ``P``.

    ``v = mu * (c - E^T y)`` with ``(E D E^T) y = E D c``, ``D = diag(mu)`` and
    ``E`` the equality system including the normalization row. ``cost``
    replaces the objective of ``lp`` when given.
    """
    cost = lp.cost if cost is None else np.asarray(cost, dtype=float).reshape(-1)
    lhs, _ = lp.equality_system
    weighted = lhs * mu.weights
    y = np.linalg.solve(weighted @ lhs.T, weighted @ cost)
    components = mu.weights * (cost - lhs.T @ y)
    # remove the roundoff drift off the tangent space
    components -= components.sum() * mu.weights
    return TangentVector(components, mu)


def euler_dual_flow(lp, mu0, t_max, steps):
    """Explicit Euler on the duals of the central path; a cross-check only.

    Along the path ``A mu_t = b`` holds, so ``lam' = -(A C A^T)^{-1} A C c``
    where ``C`` is the covariance of ``mu_t``.
    """
    _check_start(lp, mu0)
    lhs, _ = lp.reduced_constraints
    log_mu0 = np.log(mu0.weights)
    h = t_max / steps
    lam = np.zeros(lhs.shape[0])
    times = np.linspace(0.0, t_max, steps + 1)
    iterates = [mu0]
    for t in times[:-1]:
        mu = softmax(log_mu0 + t * lp.cost + lhs.T @ lam)
        if lhs.shape[0]:
            centered = lhs - (lhs @ mu)[:, None]
            covariance = (centered * mu) @ centered.T
            lam = lam - h * np.linalg.solve(covariance, (centered * mu) @ (lp.cost - lp.cost @ mu))
        iterates.append(Distribution(softmax(log_mu0 + (t + h) * lp.cost + lhs.T @ lam)))
    return times, iterates


def default_time_grid(rates=None, *, points=None, t_min=None, t_max=None):
    """``0`` followed by a geometric grid from ``t_min`` to ``horizon / delta``."""
    points = frflow_setting("GRID_POINTS") if points is None else points
    t_min = frflow_setting("GRID_T_MIN") if t_min is None else t_min
    if t_max is None:
        horizon = frflow_setting("GRID_RATE_HORIZON")
        t_max = horizon / rates.delta_rate if rates is not None and np.isfinite(rates.delta_rate) else horizon
    if points < 2 or not 0 < t_min < t_max:
        raise InvalidTimeGrid(f"cannot build a grid of {points} points on [{t_min}, {t_max}]")
    return np.concatenate([[0.0], np.geomspace(t_min, t_max, points - 1)])


def integrate_flow(lp, mu0, times, cfg=None, *, vertices=None):
    cfg = CentralPathConfig.from_settings() if cfg is None else cfg
    _check_start(lp, mu0)
    times = np.asarray(times, dtype=float)
    if times.ndim != 1 or times.size == 0 or times[0] != 0 or np.any(np.diff(times) <= 0):
        raise InvalidTimeGrid("times must start at 0 and increase strictly")

    vertices = enumerate_vertices(lp) if vertices is None else vertices
    face = optimal_face(lp, vertices)
    rates = rate_constants(lp, vertices, mu0, face=face) if face.is_proper else None
    if rates is None:
        logger.info("%r has a constant objective on P; the flow is stationary", lp)

    log_mu0 = np.log(mu0.weights)
    lam = np.zeros(lp.reduced_constraints[0].shape[0])
    iterates, duals = [mu0], [lam]
    for index in range(1, times.size):
        start = lam if cfg.warm_start else None
        t_from = times[index - 1] if cfg.warm_start else 0.0
        try:
            weights, lam = _follow(lp, log_mu0, t_from, start, times[index], cfg)
        except NonConvergence as exc:
            raise NonConvergence(
                f"central path solve failed at time index {index} (t={times[index]:g}): {exc}",
                time_index=index,
                t=float(times[index]),
            ) from exc
        iterates.append(Distribution(weights))
        duals.append(lam)

    values = np.array([lp.value(mu) for mu in iterates])
    gap = face.optimal_value - values
    nan = np.full(times.size, np.nan)
    kl, sublinear, linear_kl, linear_value = nan.copy(), nan.copy(), nan.copy(), nan.copy()
    if rates is not None:
        kl = np.array([kl_divergence(rates.mu_star, mu) for mu in iterates])
        positive = times > 0
        sublinear[positive] = rates.kl_to_start / times[positive]
        if rates.unique_optimum:
            valid = times >= rates.t0
            factors = np.array([linear_bound_factor(rates.delta_rate, rates.t0, t) for t in times[valid]])
            linear_kl[valid] = rates.kl_to_start * factors
            linear_value[valid] = rates.delta_rate * linear_kl[valid]

    logger.debug("integrated %r over %d grid times up to t=%g", lp, times.size, times[-1])
    return FlowTrajectory(
        times=times,
        iterates=tuple(iterates),
        gap=gap,
        kl=kl,
        sublinear_bound=sublinear,
        linear_bound_kl=linear_kl,
        linear_bound_value=linear_value,
        duals=np.array(duals),
        rates=rates,
    )
