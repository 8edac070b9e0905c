from dataclasses import dataclass, field

import numpy as np

from frflow.conf import frflow_setting
from frflow.exceptions import DimensionMismatch

SOFTMAX = "softmax"
ESCORT = "escort"
LOG_LINEAR = "loglinear"

STATE_ACTION = "state_action"
KAKADE = "kakade"
PRECONDITIONERS = (STATE_ACTION, KAKADE)


# ==========================
# PARAMETRIZATION
# ==========================
@dataclass(frozen=True, eq=False)
class Parametrization:
    """``theta -> pi_theta`` on an ``S x A`` table.

    ``softmax`` and ``escort`` carry one parameter per state-action pair,
    ``loglinear`` one per feature column of ``features[s, a, :]``.
    """

    kind: str
    num_states: int
    num_actions: int
    power: float = 1.0
    features: np.ndarray = field(default=None, repr=False)

    def __post_init__(self):
        if self.kind not in (SOFTMAX, ESCORT, LOG_LINEAR):
            raise ValueError(f"unknown parametrization {self.kind!r}")
        if self.kind == ESCORT and self.power < 1:
            raise ValueError(f"escort power must be at least 1, got {self.power!r}")
        if self.kind == LOG_LINEAR:
            features = np.array(self.features, dtype=float)
            if features.ndim != 3 or features.shape[:2] != (self.num_states, self.num_actions):
                raise DimensionMismatch(
                    f"features of shape {features.shape} for {self.num_states} states and {self.num_actions} actions"
                )
            features.setflags(write=False)
            object.__setattr__(self, "features", features)

    @classmethod
    def softmax(cls, num_states, num_actions):
        return cls(SOFTMAX, num_states, num_actions)

    @classmethod
    def escort(cls, num_states, num_actions, power=2.0):
        return cls(ESCORT, num_states, num_actions, power=float(power))

    @classmethod
    def log_linear(cls, features):
        features = np.asarray(features, dtype=float)
        return cls(LOG_LINEAR, features.shape[0], features.shape[1], features=features)

    @property
    def parameter_dim(self):
        if self.kind == LOG_LINEAR:
            return self.features.shape[2]
        return self.num_states * self.num_actions

    @property
    def is_tabular(self):
        return self.kind in (SOFTMAX, ESCORT)

    @property
    def label(self):
        if self.kind == ESCORT:
            return f"escort:{self.power:g}"
        return self.kind


# ==========================
# CONFIG
# ==========================
@dataclass(frozen=True)
class NpgConfig:
    preconditioner: str = STATE_ACTION
    stepsize: float = 1e-2
    pinv_rel_tol: float = 1e-10
    max_iters: int = 3000
    seed: int = 0
    blowup_threshold: float = 1e8
    # per-step compatible-FA and chi-square diagnostics
    diagnostics: bool = True

    def __post_init__(self):
        if self.preconditioner not in PRECONDITIONERS:
            raise ValueError(f"preconditioner must be one of {PRECONDITIONERS}, got {self.preconditioner!r}")
        if not self.stepsize > 0:
            raise ValueError(f"Invalid stepsize: {self.stepsize}")
        if not self.pinv_rel_tol > 0:
            raise ValueError(f"Invalid pseudo-inverse tolerance: {self.pinv_rel_tol}")
        if self.max_iters < 1:
            raise ValueError(f"Invalid iteration count: {self.max_iters}")

    @classmethod
    def from_settings(cls, **overrides):
        values = {
            "stepsize": frflow_setting("NPG_STEPSIZE"),
            "pinv_rel_tol": frflow_setting("PINV_REL_TOL"),
            "max_iters": frflow_setting("NPG_ITERS"),
            "blowup_threshold": frflow_setting("BLOWUP_THRESHOLD"),
        }
        values.update(overrides)
        return cls(**values)


# ==========================
# RESULTS
# ==========================
@dataclass(frozen=True, eq=False)
class CompatibleFit:
    """Least-squares fit of the objective gradient by the score features ``grad log d_theta``."""

    w: np.ndarray
    eps_sq: float
    # squared Fisher-Rao distance of the fitted direction to the projected gradient
    residual_sq: float


@dataclass(frozen=True, eq=False)
class TrajectoryLog:
    """One record per iterate ``theta_0 .. theta_{K-1}``; ``theta_final`` is ``theta_K``."""

    CSV_COLUMNS = ("k", "reward", "gap", "kl", "eps", "chi2")

    stepsize: float
    theta_norm: np.ndarray
    reward: np.ndarray
    gap: np.ndarray
    kl: np.ndarray
    compat_error: np.ndarray
    chi2_mismatch: np.ndarray
    occupancies: tuple = field(repr=False)
    theta_final: np.ndarray = field(repr=False)
    d_star: object = field(repr=False, default=None)
    seed: int | None = None

    def __len__(self):
        return self.reward.size

    @property
    def iterations(self):
        return np.arange(len(self))

    @property
    def times(self):
        return self.stepsize * self.iterations

    def column(self, name):
        return {
            "k": self.iterations,
            "reward": self.reward,
            "gap": self.gap,
            "kl": self.kl,
            "eps": self.compat_error,
            "chi2": self.chi2_mismatch,
        }[name]

    def rows(self):
        columns = [self.column(name) for name in self.CSV_COLUMNS]
        for index in range(len(self)):
            yield (index,) + tuple(float(column[index]) for column in columns[1:])


@dataclass(frozen=True, eq=False)
class PerturbedBound:
    eps: np.ndarray
    delta: np.ndarray
    rhs: np.ndarray
    holds: np.ndarray
