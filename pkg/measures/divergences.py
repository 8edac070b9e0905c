"""Divergences, entropy and the Fisher-Rao metric on the probability simplex."""
import numpy as np
from scipy.special import entr, rel_entr

from frflow.exceptions import AbsoluteContinuityViolation, DimensionMismatch, SingularBase

# mass below this on an atom where the reference vanishes is treated as zero
CONTINUITY_TOL = 1e-15


def _check_same_ground_set(mu, nu):
    if mu.size != nu.size:
        raise DimensionMismatch(f"ground sets differ: {mu.size} vs {nu.size}")


def _reference_support(mu, nu):
    p, q = mu.weights, nu.weights
    violating = (q == 0) & (p > CONTINUITY_TOL)
    if violating.any():
        raise AbsoluteContinuityViolation(
            f"mass on atoms {np.flatnonzero(violating).tolist()} outside the reference support",
            atoms=np.flatnonzero(violating).tolist(),
        )
    return q > 0


def _weighted_quadratic(v, w, base):
    # shared by chi2 and the Fisher-Rao inner product so both agree bitwise
    return float(np.sum(v * w / base))


def kl_divergence(mu, nu):
    _check_same_ground_set(mu, nu)
    mask = _reference_support(mu, nu)
    value = float(rel_entr(mu.weights[mask], nu.weights[mask]).sum())
    return max(value, 0.0)


def tv_distance(mu, nu):
    _check_same_ground_set(mu, nu)
    return 0.5 * float(np.abs(mu.weights - nu.weights).sum())


def chi2_divergence(mu, nu):
    _check_same_ground_set(mu, nu)
    mask = _reference_support(mu, nu)
    diff = mu.weights[mask] - nu.weights[mask]
    return _weighted_quadratic(diff, diff, nu.weights[mask])


def entropy(mu):
    return float(entr(mu.weights).sum())


def fisher_rao_inner(v, w, base=None):
    """``g_base(v, w) = sum v_x w_x / base_x``; the base must be strictly positive."""
    base = v.base if base is None else base
    for tangent in (v, w):
        if tangent.components.shape != base.weights.shape:
            raise DimensionMismatch("tangent vector and base point live on different ground sets")
    if not base.is_strictly_positive():
        raise SingularBase(f"base point has zero atoms {np.flatnonzero(base.weights == 0).tolist()}")
    return _weighted_quadratic(v.components, w.components, base.weights)


def fisher_rao_norm(v, base=None):
    return float(np.sqrt(max(fisher_rao_inner(v, v, base), 0.0)))


def min_positive(mu):
    weights = mu.weights if hasattr(mu, "weights") else np.asarray(mu)
    return float(weights[weights > 0].min())


def kl_tv_local_bound(mu, nu):
    """Local upper bound on ``KL(mu, nu)`` in terms of TV.

    Valid while ``max |mu - nu|`` stays below the smallest positive atom of
    ``mu``; returns ``None`` outside that neighbourhood.
    """
    _check_same_ground_set(mu, nu)
    smallest = min_positive(mu)
    sup_gap = float(np.max(np.abs(mu.weights - nu.weights)))
    if sup_gap >= smallest:
        return None
    return (smallest + sup_gap) / (smallest - sup_gap) * tv_distance(mu, nu)
