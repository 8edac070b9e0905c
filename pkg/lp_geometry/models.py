from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from frflow.exceptions import DimensionMismatch, InfeasibleConstraints
from measures.models import AffineConstraints, Distribution
from measures.projection import feasible_support, independent_rows, reduce_constraints


# ==========================
# SIMPLEX LP
# ==========================
@dataclass(frozen=True, eq=False)
class SimplexLp:
    """``max c.mu`` over ``P = {mu in simplex: A mu = b}``.

    Redundant rows of ``A`` are dropped at construction and ``P`` must contain
    a strictly positive point.
    """

    cost: np.ndarray
    constraint_lhs: np.ndarray = None
    constraint_rhs: np.ndarray = None
    name: str = ""

    def __post_init__(self):
        cost = np.array(self.cost, dtype=float).reshape(-1)
        n = cost.size
        if n == 0:
            raise DimensionMismatch("empty ground set")
        lhs = np.zeros((0, n)) if self.constraint_lhs is None else np.array(self.constraint_lhs, dtype=float)
        rhs = np.zeros(0) if self.constraint_rhs is None else np.array(self.constraint_rhs, dtype=float).reshape(-1)
        if lhs.ndim != 2 or lhs.shape[1] != n or lhs.shape[0] != rhs.size:
            raise DimensionMismatch(f"constraints of shape {lhs.shape} / {rhs.shape} for a ground set of size {n}")

        keep = independent_rows(lhs, rhs)
        lhs, rhs = lhs[keep], rhs[keep]
        support, point = feasible_support(lhs, rhs)
        if support.size != n:
            missing = sorted(set(range(n)) - set(support.tolist()))
            raise InfeasibleConstraints(f"feasible region has no strictly positive point (atoms {missing} vanish)")

        for name, value in (("cost", cost), ("constraint_lhs", lhs), ("constraint_rhs", rhs)):
            value.setflags(write=False)
            object.__setattr__(self, name, value)
        object.__setattr__(self, "interior_point", Distribution(point / point.sum()))

    @property
    def ground_set_size(self):
        return self.cost.size

    @property
    def constraints(self):
        return AffineConstraints(self.constraint_lhs, self.constraint_rhs)

    @cached_property
    def reduced_constraints(self):
        """Rows orthogonal to the all-ones vector, as the dual Newton solver expects."""
        return reduce_constraints(self.constraint_lhs, self.constraint_rhs)

    @cached_property
    def equality_system(self):
        """``[1; A] mu = [1; b]`` with full row rank."""
        lhs, rhs = self.reduced_constraints
        return np.vstack([np.ones(self.ground_set_size), lhs]), np.concatenate([[1.0], rhs])

    @property
    def dimension(self):
        return self.ground_set_size - self.equality_system[0].shape[0]

    def value(self, mu):
        weights = mu.weights if isinstance(mu, Distribution) else np.asarray(mu)
        return float(self.cost @ weights)

    def is_feasible(self, mu, tol=1e-10):
        return self.constraints.residual(mu) <= tol

    def with_cost(self, cost):
        return SimplexLp(cost, self.constraint_lhs, self.constraint_rhs, name=self.name)

    def __repr__(self):
        return f"SimplexLp({self.name or 'unnamed'}, |X|={self.ground_set_size}, dim={self.dimension})"


# ==========================
# VERTICES AND FACES
# ==========================
@dataclass(frozen=True, eq=False)
class VertexSet:
    vertices: tuple
    adjacency: np.ndarray

    def __post_init__(self):
        adjacency = np.array(self.adjacency, dtype=bool)
        adjacency.setflags(write=False)
        object.__setattr__(self, "vertices", tuple(self.vertices))
        object.__setattr__(self, "adjacency", adjacency)

    def __len__(self):
        return len(self.vertices)

    def __getitem__(self, index):
        return self.vertices[index]

    def __iter__(self):
        return iter(self.vertices)

    @cached_property
    def matrix(self):
        return np.vstack([v.weights for v in self.vertices])

    @property
    def support_sets(self):
        return tuple(frozenset(v.support.tolist()) for v in self.vertices)

    def neighbors(self, index):
        return np.flatnonzero(self.adjacency[index])

    def values(self, cost):
        return self.matrix @ np.asarray(cost, dtype=float)

    def index_of(self, mu, atol=1e-8):
        gaps = np.max(np.abs(self.matrix - mu.weights), axis=1)
        best = int(np.argmin(gaps))
        return best if gaps[best] <= atol else None


@dataclass(frozen=True)
class OptimalFace:
    vertex_indices: tuple
    optimal_value: float
    num_vertices: int

    def __len__(self):
        return len(self.vertex_indices)

    def __contains__(self, index):
        return index in self.vertex_indices

    @property
    def is_unique(self):
        return len(self.vertex_indices) == 1

    @property
    def is_proper(self):
        return len(self.vertex_indices) < self.num_vertices


@dataclass(frozen=True, eq=False)
class RateConstants:
    delta_rate: float
    delta_lower: float
    t0: float | None
    unique_optimum: bool
    optimal_value: float
    face_size: int
    mu_star: Distribution = field(repr=False, default=None)
    kl_to_start: float = field(default=float("nan"))
