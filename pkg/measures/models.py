from dataclasses import dataclass

import numpy as np

from frflow.exceptions import DimensionMismatch, InvalidDistribution

SUM_TOL = 1e-12
TANGENT_TOL = 1e-10
# entries this small are treated as exact zeros when normalizing solver output
ZERO_CLIP = 1e-15


def _frozen(array):
    array = np.array(array, dtype=float)
    array.setflags(write=False)
    return array


# ==========================
# DISTRIBUTION
# ==========================
@dataclass(frozen=True, eq=False)
class Distribution:
    """A probability vector on a finite ground set ``{0, ..., n-1}``."""

    weights: np.ndarray

    def __post_init__(self):
        w = _frozen(self.weights)
        if w.ndim != 1 or w.size == 0:
            raise InvalidDistribution(f"weights must be a non-empty vector, got shape {w.shape}")
        if not np.all(np.isfinite(w)):
            raise InvalidDistribution("weights must be finite")
        if w.min() < 0:
            raise InvalidDistribution(f"negative weight {w.min():.3e}")
        total = w.sum()
        if abs(total - 1.0) > SUM_TOL:
            raise InvalidDistribution(f"weights sum to {total!r}, not 1")
        object.__setattr__(self, "weights", w)

    @classmethod
    def from_unnormalized(cls, values):
        values = np.array(values, dtype=float)
        values[np.abs(values) <= ZERO_CLIP * max(1.0, np.abs(values).max(initial=0.0))] = 0.0
        total = values.sum()
        if not total > 0:
            raise InvalidDistribution("cannot normalize a vector with non-positive mass")
        return cls(values / total)

    @classmethod
    def uniform(cls, size):
        return cls(np.full(size, 1.0 / size))

    @classmethod
    def dirac(cls, size, atom):
        w = np.zeros(size)
        w[atom] = 1.0
        return cls(w)

    @property
    def size(self):
        return self.weights.size

    def __len__(self):
        return self.weights.size

    @property
    def support(self):
        return np.flatnonzero(self.weights > 0)

    def is_strictly_positive(self):
        return bool(self.weights.min() > 0)

    def allclose(self, other, atol=1e-9):
        return self.size == other.size and bool(np.max(np.abs(self.weights - other.weights)) <= atol)

    def __repr__(self):
        return f"Distribution({np.array2string(self.weights, precision=6)})"


# ==========================
# TANGENT VECTOR
# ==========================
@dataclass(frozen=True, eq=False)
class TangentVector:
    """A direction tangent to the simplex, attached to a base point."""

    components: np.ndarray
    base: Distribution

    def __post_init__(self):
        v = _frozen(self.components)
        if v.shape != self.base.weights.shape:
            raise DimensionMismatch(f"tangent of shape {v.shape} at a base of size {self.base.size}")
        if abs(v.sum()) > TANGENT_TOL:
            raise InvalidDistribution(f"components sum to {v.sum():.3e}; not tangent to the simplex")
        object.__setattr__(self, "components", v)

    @classmethod
    def between(cls, mu, nu, base=None):
        """The chord ``mu - nu`` attached at ``base`` (defaults to ``nu``)."""
        return cls(mu.weights - nu.weights, nu if base is None else base)


# ==========================
# AFFINE CONSTRAINTS
# ==========================
@dataclass(frozen=True, eq=False)
class AffineConstraints:
    """The affine system ``lhs @ mu = rhs``, intersected with the simplex where used."""

    lhs: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        lhs = np.array(self.lhs, dtype=float)
        rhs = np.array(self.rhs, dtype=float).reshape(-1)
        if lhs.ndim != 2 or lhs.shape[0] != rhs.size:
            raise DimensionMismatch(f"lhs of shape {lhs.shape} does not match rhs of size {rhs.size}")
        object.__setattr__(self, "lhs", _frozen(lhs))
        object.__setattr__(self, "rhs", _frozen(rhs))

    @classmethod
    def none(cls, size):
        return cls(np.zeros((0, size)), np.zeros(0))

    @property
    def ground_set_size(self):
        return self.lhs.shape[1]

    def stacked(self, row, value):
        return AffineConstraints(np.vstack([self.lhs, row]), np.append(self.rhs, value))

    def residual(self, mu):
        weights = mu.weights if isinstance(mu, Distribution) else np.asarray(mu)
        if self.lhs.shape[0] == 0:
            return 0.0
        return float(np.max(np.abs(self.lhs @ weights - self.rhs)))
