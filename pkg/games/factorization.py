"""Additive decomposition of payoff tensors over ``X^n``."""
import logging

import numpy as np

from frflow.conf import frflow_setting
from frflow.exceptions import DimensionMismatch, NotFactorizable, SizeLimitExceeded

from .models import FactorizedCost

logger = logging.getLogger(__name__)

FACTOR_RTOL = 1e-9


def check_joint_size(num_players, num_actions, budget=None):
    budget = frflow_setting("JOINT_SIZE_BUDGET") if budget is None else budget
    size = num_actions**num_players
    if size > budget:
        raise SizeLimitExceeded(f"{num_actions}^{num_players} = {size} joint outcomes exceed the budget of {budget}")
    return size


def as_tensor(cost, num_players=None, num_actions=None):
    """Reshape a flat, player-major cost vector into an ``(|X|,) * n`` tensor."""
    cost = np.asarray(cost, dtype=float)
    if num_players is None:
        if cost.ndim == 0 or len(set(cost.shape)) != 1:
            raise DimensionMismatch(f"cost tensor of shape {cost.shape} is not over a common action set")
        return cost
    num_actions = int(round(cost.size ** (1.0 / num_players))) if num_actions is None else num_actions
    check_joint_size(num_players, num_actions)
    if cost.size != num_actions**num_players:
        raise DimensionMismatch(f"{cost.size} entries for {num_players} players with {num_actions} actions")
    return cost.reshape((num_actions,) * num_players)


def factorize_cost(cost, num_players=None, num_actions=None):
    """Least-squares projection of ``cost`` onto ``{sum_i c_i(x_i)}``.

    The first factor carries the grand mean, the others are centered.
    """
    tensor = as_tensor(cost, num_players, num_actions)
    n, k = tensor.ndim, tensor.shape[0]
    check_joint_size(n, k)

    grand = tensor.mean()
    factors = []
    for i in range(n):
        others = tuple(axis for axis in range(n) if axis != i)
        marginal = tensor.mean(axis=others) if others else tensor.copy()
        factors.append(marginal if i == 0 else marginal - grand)
    fc = FactorizedCost(np.vstack(factors))

    residual = float(np.max(np.abs(tensor - fc.assembled())))
    scale = float(np.max(np.abs(tensor)))
    if residual > FACTOR_RTOL * scale:
        raise NotFactorizable(f"cost is {residual:.3e} away from a sum of per-player costs", residual=residual)
    logger.debug("factorized a %d-player cost over %d actions (residual %.1e)", n, k, residual)
    return fc


def parameter_counts(num_players, num_actions):
    """Parameters of the independence model and of a softmax on the joint outcomes."""
    return num_players * (num_actions - 1), num_actions**num_players - 1
