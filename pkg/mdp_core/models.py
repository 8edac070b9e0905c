from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from frflow.exceptions import DimensionMismatch, InvalidDistribution, PreconditionError
from measures.models import SUM_TOL, Distribution


def _read_only(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


def _check_rows(table, what):
    if table.min() < 0:
        raise InvalidDistribution(f"{what} has a negative entry {table.min():.3e}")
    worst = float(np.max(np.abs(table.sum(axis=-1) - 1.0)))
    if worst > SUM_TOL:
        raise InvalidDistribution(f"{what} rows miss normalization by {worst:.3e}")


# ==========================
# MDP
# ==========================
@dataclass(frozen=True, eq=False)
class Mdp:
    """Finite discounted MDP; ``transition[s, a, s']`` is ``P(s'|s, a)``."""

    transition: np.ndarray
    reward: np.ndarray
    discount: float
    initial: Distribution
    name: str = ""

    def __post_init__(self):
        transition = _read_only(self.transition)
        reward = _read_only(self.reward)
        if transition.ndim != 3 or transition.shape[0] != transition.shape[2]:
            raise DimensionMismatch(f"transition table must have shape (S, A, S), got {transition.shape}")
        if reward.shape != transition.shape[:2]:
            raise DimensionMismatch(f"reward of shape {reward.shape} for transitions {transition.shape}")
        if self.initial.size != transition.shape[0]:
            raise DimensionMismatch(f"initial distribution on {self.initial.size} states, expected {transition.shape[0]}")
        if not 0 <= self.discount < 1:
            raise PreconditionError(f"discount must lie in [0, 1), got {self.discount!r}")
        _check_rows(transition, "transition")
        object.__setattr__(self, "transition", transition)
        object.__setattr__(self, "reward", reward)
        object.__setattr__(self, "discount", float(self.discount))

    @property
    def num_states(self):
        return self.transition.shape[0]

    @property
    def num_actions(self):
        return self.transition.shape[1]

    def index(self, state, action):
        return state * self.num_actions + action

    def with_reward(self, reward, name=None):
        return Mdp(self.transition, reward, self.discount, self.initial, self.name if name is None else name)

    @cached_property
    def flow_constraints(self):
        """``(L, b)`` with ``L d = b`` the defining equations of the state-action polytope.

        ``L[s, (s', a')] = [s = s'] - gamma P(s|s', a')`` and ``b = (1 - gamma) mu``.
        """
        S, A = self.num_states, self.num_actions
        lhs = np.repeat(np.eye(S), A, axis=1) - self.discount * self.transition.reshape(S * A, S).T
        return lhs, (1.0 - self.discount) * self.initial.weights

    def flow_residual(self, d):
        lhs, rhs = self.flow_constraints
        return float(np.max(np.abs(lhs @ d.weights - rhs)))

    def __repr__(self):
        return f"Mdp({self.name or 'unnamed'}, S={self.num_states}, A={self.num_actions}, gamma={self.discount:g})"


# ==========================
# POLICY
# ==========================
@dataclass(frozen=True, eq=False)
class Policy:
    table: np.ndarray

    def __post_init__(self):
        table = _read_only(self.table)
        if table.ndim != 2:
            raise DimensionMismatch(f"policy table must be (S, A), got {table.shape}")
        _check_rows(table, "policy")
        object.__setattr__(self, "table", table)

    @classmethod
    def uniform(cls, num_states, num_actions):
        return cls(np.full((num_states, num_actions), 1.0 / num_actions))

    @classmethod
    def deterministic(cls, actions, num_actions):
        table = np.zeros((len(actions), num_actions))
        table[np.arange(len(actions)), actions] = 1.0
        return cls(table)

    @property
    def num_states(self):
        return self.table.shape[0]

    @property
    def num_actions(self):
        return self.table.shape[1]

    def row(self, state):
        return Distribution(self.table[state])

    @property
    def is_deterministic(self):
        return bool(np.all((self.table == 0) | (self.table == 1)))

    @property
    def actions(self):
        return tuple(int(a) for a in self.table.argmax(axis=1))

    def __repr__(self):
        if self.is_deterministic:
            return f"Policy(actions={self.actions})"
        return f"Policy({np.array2string(self.table, precision=4)})"


@dataclass(frozen=True, eq=False)
class StateActionDistribution(Distribution):
    """A distribution over ``S x A``, flattened state-major."""

    num_states: int = 0
    num_actions: int = 0

    def __post_init__(self):
        super().__post_init__()
        if self.size != self.num_states * self.num_actions:
            raise DimensionMismatch(f"{self.size} weights for {self.num_states} x {self.num_actions} pairs")

    @property
    def table(self):
        return self.weights.reshape(self.num_states, self.num_actions)

    @property
    def state_marginal(self):
        return self.table.sum(axis=1)


# ==========================
# RESULTS
# ==========================
@dataclass(frozen=True, eq=False)
class OptimalValues:
    v_star: np.ndarray
    q_star: np.ndarray
    a_star: np.ndarray
    optimal_actions: tuple
    greedy_policy: Policy

    @property
    def unique(self):
        return all(len(actions) == 1 for actions in self.optimal_actions)


@dataclass(frozen=True, eq=False)
class MdpRates:
    delta_rate: float
    delta_lower: float
    delta_kakade: float
    unique_optimum: bool
    optimal_value: float
    t0: float | None = None
    face_size: int = 1
    deterministic_rewards: dict = field(default_factory=dict, repr=False)
