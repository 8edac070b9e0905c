"""Policy parametrizations and their analytic Jacobians ``d pi(a|s) / d theta``."""
import logging

import numpy as np
from scipy.special import softmax

from frflow.exceptions import DimensionMismatch, EscortSingularity, InvalidDistribution
from mdp_core.models import Policy

from .models import ESCORT, LOG_LINEAR, SOFTMAX

logger = logging.getLogger(__name__)

ESCORT_FLOOR = 1e-8


def _check_theta(par, theta):
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (par.parameter_dim,):
        raise DimensionMismatch(f"theta of shape {theta.shape} for {par.parameter_dim} parameters")
    if not np.all(np.isfinite(theta)):
        raise InvalidDistribution("theta must be finite")
    return theta


def _categorical_jacobian(pi):
    """``d pi(a|s) / d logit(s, b) = pi(a|s) ([a = b] - pi(b|s))``, shape ``(S, A, A)``."""
    return pi[:, :, None] * (np.eye(pi.shape[1])[None, :, :] - pi[:, None, :])


def _scatter_tabular(blocks):
    """Embed per-state ``(S, A, A)`` blocks into the full ``(S, A, S*A)`` Jacobian."""
    S, A, _ = blocks.shape
    jacobian = np.zeros((S, A, S, A))
    jacobian[np.arange(S), :, np.arange(S), :] = blocks
    return jacobian.reshape(S, A, S * A)


def policy_and_jacobian(par, theta):
    theta = _check_theta(par, theta)
    S, A = par.num_states, par.num_actions

    if par.kind == SOFTMAX:
        pi = softmax(theta.reshape(S, A), axis=1)
        return Policy(pi), _scatter_tabular(_categorical_jacobian(pi))

    if par.kind == ESCORT:
        table = theta.reshape(S, A)
        if np.min(np.abs(table)) <= ESCORT_FLOOR:
            raise EscortSingularity(f"escort parameter {np.min(np.abs(table)):.2e} is too close to 0")
        weights = np.abs(table) ** par.power
        totals = weights.sum(axis=1, keepdims=True)
        pi = weights / totals
        # d w_b / d theta_b = p sign(theta_b) |theta_b|^(p-1)
        slopes = par.power * np.sign(table) * np.abs(table) ** (par.power - 1.0) / totals
        blocks = (np.eye(A)[None, :, :] - pi[:, :, None]) * slopes[:, None, :]
        return Policy(pi), _scatter_tabular(blocks)

    if par.kind == LOG_LINEAR:
        logits = par.features @ theta
        pi = softmax(logits, axis=1)
        mean_features = np.einsum("sa,sap->sp", pi, par.features)
        jacobian = pi[:, :, None] * (par.features - mean_features[:, None, :])
        return Policy(pi), jacobian

    raise ValueError(f"unknown parametrization {par.kind!r}")


def clamp_escort(par, theta):
    """Push escort parameters away from 0, keeping their sign."""
    if par.kind != ESCORT:
        return theta
    small = np.abs(theta) <= ESCORT_FLOOR
    if not small.any():
        return theta
    logger.warning("clamping %d escort parameters to magnitude %.0e", int(small.sum()), 2 * ESCORT_FLOOR)
    theta = theta.copy()
    theta[small] = np.where(theta[small] < 0, -2 * ESCORT_FLOOR, 2 * ESCORT_FLOOR)
    return theta


def random_theta(par, seed):
    """Standard-normal initialization."""
    return np.random.default_rng(seed).standard_normal(par.parameter_dim)


def tangent_rank(par, theta, rtol=1e-9):
    """Rank of ``theta -> pi_theta``; ``S (A - 1)`` for a regular tabular parametrization."""
    _, jacobian = policy_and_jacobian(par, theta)
    flat = jacobian.reshape(-1, par.parameter_dim)
    return int(np.linalg.matrix_rank(flat, tol=rtol * max(1.0, np.abs(flat).max())))


def is_regular(par, theta):
    return tangent_rank(par, theta) == par.num_states * (par.num_actions - 1)
