"""Constructors for the bundled linear programs."""
import numpy as np

from .models import SimplexLp


def simplex_lp(cost, name="simplex"):
    return SimplexLp(np.asarray(cost, dtype=float), name=name)


def improvement_example(alpha, cost=None):
    """Four atoms with ``mu(0) = alpha``.

    With the default cost ``e_1`` the vertex-gap rate is ``1 - alpha`` while
    the exponential rate stays 1.
    """
    cost = np.array([0.0, 1.0, 0.0, 0.0]) if cost is None else cost
    return SimplexLp(cost, [[1.0, 0.0, 0.0, 0.0]], [alpha], name=f"ex35(alpha={alpha:g})")


def quadrilateral_example(cost=(1.0, 0.0, 0.0, 0.0)):
    """Four atoms with ``mu(0) + mu(1) = 1/2``: the feasible region is a square."""
    return SimplexLp(np.asarray(cost, dtype=float), [[1.0, 1.0, 0.0, 0.0]], [0.5], name="square")
