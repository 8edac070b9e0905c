from dataclasses import dataclass, field, fields

import numpy as np

from frflow.conf import frflow_setting


@dataclass(frozen=True)
class CentralPathConfig:
    newton_tol: float = 1e-12
    newton_max_iter: int = 200
    warm_start: bool = True

    def __post_init__(self):
        if not self.newton_tol > 0:
            raise ValueError(f"newton_tol must be positive, got {self.newton_tol!r}")
        if self.newton_max_iter < 1:
            raise ValueError(f"newton_max_iter must be positive, got {self.newton_max_iter!r}")

    @classmethod
    def from_settings(cls, **overrides):
        values = {
            "newton_tol": frflow_setting("NEWTON_TOL"),
            "newton_max_iter": frflow_setting("NEWTON_MAX_ITER"),
        }
        values.update(overrides)
        return cls(**values)


@dataclass(frozen=True)
class ConvergenceBounds:
    sublinear_bound: float
    linear_bound_kl: float
    linear_bound_value: float
    regularization_bound_kl: float
    regularization_bound_value: float
    # False for the asymptotic form used when the optimum is not unique
    certified: bool = True

    def as_dict(self):
        return {f.name: getattr(self, f.name) for f in fields(self)}


@dataclass(frozen=True, eq=False)
class FlowTrajectory:
    """Iterates of the flow on a time grid with per-time diagnostics.

    Diagnostics that do not apply at a time (bounds before ``t0``, KL without
    an optimum) are NaN.
    """

    CSV_COLUMNS = ("t", "gap", "kl", "sublinear_bound", "linear_bound_kl", "linear_bound_value")

    times: np.ndarray
    iterates: tuple
    gap: np.ndarray
    kl: np.ndarray
    sublinear_bound: np.ndarray
    linear_bound_kl: np.ndarray
    linear_bound_value: np.ndarray
    duals: np.ndarray = field(repr=False, default=None)
    rates: object = field(repr=False, default=None)

    def __len__(self):
        return len(self.times)

    @property
    def final(self):
        return self.iterates[-1]

    def column(self, name):
        return self.times if name == "t" else getattr(self, name)

    def rows(self):
        columns = [self.column(name) for name in self.CSV_COLUMNS]
        for index in range(len(self.times)):
            yield tuple(float(column[index]) for column in columns)
