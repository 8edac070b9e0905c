from dataclasses import dataclass
from functools import reduce

import numpy as np

from frflow.exceptions import DimensionMismatch
from measures.models import Distribution


# ==========================
# PAYOFF
# ==========================
@dataclass(frozen=True, eq=False)
class FactorizedCost:
    """``c(x_1, ..., x_n) = sum_i c_i(x_i)``; ``factors[i]`` is ``c_i`` over the action set ``X``."""

    factors: np.ndarray

    def __post_init__(self):
        factors = np.array(self.factors, dtype=float)
        if factors.ndim != 2 or 0 in factors.shape:
            raise DimensionMismatch(f"factors must be an (n, |X|) table, got shape {factors.shape}")
        factors.setflags(write=False)
        object.__setattr__(self, "factors", factors)

    @property
    def num_players(self):
        return self.factors.shape[0]

    @property
    def num_actions(self):
        return self.factors.shape[1]

    @property
    def joint_size(self):
        return self.num_actions**self.num_players

    def assembled(self):
        """The cost tensor over ``X^n``, axis ``i`` indexing player ``i``."""
        n = self.num_players
        return sum(
            factor.reshape((1,) * i + (-1,) + (1,) * (n - i - 1)) for i, factor in enumerate(self.factors)
        ) * np.ones((self.num_actions,) * n)

    def flat(self):
        return self.assembled().ravel()


# ==========================
# STATE
# ==========================
@dataclass(frozen=True, eq=False)
class IndependenceState:
    """A product measure, stored as its per-player factors."""

    factors: tuple

    def __post_init__(self):
        factors = tuple(f if isinstance(f, Distribution) else Distribution(f) for f in self.factors)
        if not factors or len({f.size for f in factors}) != 1:
            raise DimensionMismatch("players must share one non-empty action set")
        object.__setattr__(self, "factors", factors)

    @classmethod
    def uniform(cls, num_players, num_actions):
        return cls(tuple(Distribution.uniform(num_actions) for _ in range(num_players)))

    @property
    def num_players(self):
        return len(self.factors)

    def joint(self):
        table = reduce(np.multiply.outer, (f.weights for f in self.factors))
        table = np.ravel(table)
        return Distribution(table / table.sum())

    def marginals(self):
        return np.vstack([f.weights for f in self.factors])
