"""Discrete natural policy gradient ``theta <- theta + eta G(theta)^+ grad R(theta)``."""
import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import replace

import numpy as np
from scipy.integrate import cumulative_trapezoid

from frflow.conf import frflow_setting
from frflow.exceptions import BoundNotApplicable, NumericalBlowup
from lp_geometry.faces import optimal_face
from lp_geometry.vertices import enumerate_vertices
from mdp_core.occupancy import state_action_lp
from mdp_core.rates import optimal_occupancy
from measures.divergences import chi2_divergence, kl_divergence

from .fisher import differentiate, natural_gradient, projection_residual_sq
from .models import NpgConfig, PerturbedBound, TrajectoryLog
from .parametrizations import clamp_escort, random_theta

logger = logging.getLogger(__name__)

# log-values below this are roundoff and left out of tail fits
TAIL_FLOOR = 1e-13
BOUND_TOL = 1e-9


def _trajectory(cfg, records, theta, d_star):
    arrays = {name: np.array(values) for name, values in records.items() if name != "occupancies"}
    return TrajectoryLog(
        stepsize=cfg.stepsize,
        occupancies=tuple(records["occupancies"]),
        theta_final=theta,
        d_star=d_star,
        seed=cfg.seed,
        **arrays,
    )


def run_npg(mdp, par, cfg=None, theta0=None, *, lp=None, vertices=None):
    cfg = NpgConfig.from_settings() if cfg is None else cfg
    theta = random_theta(par, cfg.seed) if theta0 is None else np.array(theta0, dtype=float)
    theta = clamp_escort(par, theta)
    lp = state_action_lp(mdp) if lp is None else lp
    vertices = enumerate_vertices(lp) if vertices is None else vertices
    optimum = optimal_face(lp, vertices).optimal_value
    d_star = optimal_occupancy(mdp, differentiate(mdp, par, theta).occupancy, lp=lp, vertices=vertices)
    reward = mdp.reward.ravel()

    records = {name: [] for name in ("theta_norm", "reward", "gap", "kl", "compat_error", "chi2_mismatch", "occupancies")}
    for k in range(cfg.max_iters):
        diff = differentiate(mdp, par, theta)
        d = diff.occupancy
        direction = natural_gradient(mdp, par, theta, cfg.preconditioner, cfg.pinv_rel_tol, diff=diff)

        value = float(reward @ d.weights)
        records["theta_norm"].append(float(np.max(np.abs(theta))))
        records["reward"].append(value)
        records["gap"].append(optimum - value)
        records["kl"].append(kl_divergence(d_star, d))
        records["occupancies"].append(d)
        if cfg.diagnostics:
            records["compat_error"].append(np.sqrt(projection_residual_sq(lp, diff, direction, reward)))
            records["chi2_mismatch"].append(chi2_divergence(d_star, d))
        else:
            records["compat_error"].append(np.nan)
            records["chi2_mismatch"].append(np.nan)

        theta = clamp_escort(par, theta + cfg.stepsize * direction)
        if np.max(np.abs(theta)) > cfg.blowup_threshold:
            logger.error("%r: parameters blew up at iteration %d (|theta| = %.3e)", mdp, k + 1, np.max(np.abs(theta)))
            raise NumericalBlowup(
                f"|theta| exceeded {cfg.blowup_threshold:g} at iteration {k + 1}",
                iteration=k + 1,
                log=_trajectory(cfg, records, theta, d_star),
            )

    logger.debug("%s NPG on %r: %d iterations, final gap %.3e", cfg.preconditioner, mdp, cfg.max_iters, records["gap"][-1])
    return _trajectory(cfg, records, theta, d_star)


def run_npg_seeds(mdp, par, cfg, seeds, *, threads=None):
    """One run per seed on a thread pool; results come back in seed order."""
    threads = frflow_setting("THREADS") if threads is None else threads
    lp = state_action_lp(mdp)
    vertices = enumerate_vertices(lp)

    def run(seed):
        return run_npg(mdp, par, replace(cfg, seed=seed), lp=lp, vertices=vertices)

    with ThreadPoolExecutor(max_workers=max(1, threads)) as pool:
        return list(pool.map(run, seeds))


def perturbed_bound_terms(mdp, trajectory, d_star=None, tol=BOUND_TOL):
    """``gap_k <= (KL(d*, d_0) + int_0^t eps delta) / t`` with ``delta^2 = chi2(d*, d_t)``.

    The integral is the trapezoid rule on ``t_k = eta k``.
    """
    d_star = trajectory.d_star if d_star is None else d_star
    eps = trajectory.compat_error
    if np.isnan(eps).any():
        raise BoundNotApplicable("the trajectory was recorded without diagnostics")
    delta = np.sqrt(trajectory.chi2_mismatch)
    times = trajectory.times
    integral = cumulative_trapezoid(eps * delta, times, initial=0.0)
    kl0 = kl_divergence(d_star, trajectory.occupancies[0])
    rhs = np.full(times.size, np.inf)
    rhs[1:] = (kl0 + integral[1:]) / times[1:]
    holds = trajectory.gap <= rhs + tol * np.maximum(1.0, np.abs(np.where(np.isfinite(rhs), rhs, 0.0)))
    return PerturbedBound(eps=eps, delta=delta, rhs=rhs, holds=holds)


def tail_slope(values, eta=1.0, fraction=0.5, floor=TAIL_FLOOR):
    """Slope of ``log values`` against ``t = eta k`` over the last ``fraction`` of the run."""
    values = np.asarray(values, dtype=float)
    start = int(values.size * (1.0 - fraction))
    k = np.arange(start, values.size)
    tail = values[start:]
    usable = tail > floor
    if usable.sum() < 2:
        return np.nan
    return float(np.polyfit(eta * k[usable], np.log(tail[usable]), 1)[0])
