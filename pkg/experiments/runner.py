"""Experiment drivers behind the management commands.

Computation happens here; the commands only parse flags, write files from
the collected results and print summaries.
"""
import logging
from dataclasses import dataclass, field
from io import BytesIO
from pathlib import Path

import numpy as np
from rest_framework.exceptions import ParseError
from rest_framework.parsers import JSONParser
from rest_framework.renderers import JSONRenderer

import frflow
from flow.central_path import default_time_grid, integrate_flow
from frflow.exceptions import InstanceParseError, PreconditionError, TrivialProgram
from games.dynamics import factor_flow_deviation
from lp_geometry.faces import max_entropy_point, rate_constants
from lp_geometry.vertices import enumerate_vertices
from mdp_core.catalog import kakade_example
from mdp_core.occupancy import occupancy, state_action_lp, uniform_policy
from mdp_core.rates import mdp_rate_constants
from npg.iteration import run_npg_seeds, tail_slope
from npg.models import ESCORT, KAKADE, LOG_LINEAR, SOFTMAX, STATE_ACTION, NpgConfig, Parametrization

from .models import ExperimentManifest
from .output import PALETTE, Panel, Series, reference_series
from .parsing import GAME, MDP, load_features
from .serializers import ExperimentManifestSerializer

logger = logging.getLogger(__name__)

RATES_COLUMNS = ("delta", "delta_lower", "delta_kakade", "t0", "optimal_value", "face_size")
GAME_COLUMNS = ("t", "tv")

PRECONDITIONER_FLAGS = {
    "state-action": STATE_ACTION,
    "kakade": KAKADE,
}

REFERENCE_COLOR = "#000000"
BOUND_COLOR = "#555555"
SEED_OPACITY = 0.35


# ==========================
# RATES / FLOW
# ==========================
@dataclass(frozen=True)
class RateReport:
    delta: float
    delta_lower: float
    # NaN for plain linear programs
    delta_kakade: float
    t0: float | None
    optimal_value: float
    face_size: int
    deterministic_rewards: dict = field(default_factory=dict)

    def row(self):
        t0 = np.nan if self.t0 is None else self.t0
        return (self.delta, self.delta_lower, self.delta_kakade, t0, self.optimal_value, self.face_size)


def flow_problem(instance):
    """The linear program behind an instance and the start of its flow.

    MDPs start from the occupancy of the uniform policy, plain programs from
    the maximum-entropy feasible point.
    """
    if instance.kind == MDP:
        mdp = instance.program
        return state_action_lp(mdp), occupancy(mdp, uniform_policy(mdp))
    if instance.is_program:
        return instance.program, max_entropy_point(instance.program)
    raise PreconditionError(f"{instance.name} is a {instance.kind} instance, not a linear program or MDP")


def compute_rates(instance):
    if instance.kind == MDP:
        rates = mdp_rate_constants(instance.program)
        return RateReport(
            delta=rates.delta_rate,
            delta_lower=rates.delta_lower,
            delta_kakade=rates.delta_kakade,
            t0=rates.t0,
            optimal_value=rates.optimal_value,
            face_size=rates.face_size,
            deterministic_rewards=rates.deterministic_rewards,
        )
    lp, mu0 = flow_problem(instance)
    rc = rate_constants(lp, enumerate_vertices(lp), mu0)
    return RateReport(
        delta=rc.delta_rate,
        delta_lower=rc.delta_lower,
        delta_kakade=np.nan,
        t0=rc.t0,
        optimal_value=rc.optimal_value,
        face_size=rc.face_size,
    )


def compute_flow(instance, *, t_max=None, grid_points=None):
    lp, mu0 = flow_problem(instance)
    vertices = enumerate_vertices(lp)
    rates = None
    if t_max is None:
        try:
            rates = rate_constants(lp, vertices, mu0)
        except TrivialProgram:
            logger.info("%s has a constant objective; using the default horizon", instance.name)
    times = default_time_grid(rates, points=grid_points, t_max=t_max)
    return integrate_flow(lp, mu0, times, vertices=vertices)


def flow_panels(trajectory):
    t = trajectory.times
    gap = Panel("Optimality gap", "t", "gap", (
        Series("gap", t, trajectory.gap),
        Series("KL0 / t", t, trajectory.sublinear_bound, style="dashed", color=BOUND_COLOR),
        Series("exponential bound", t, trajectory.linear_bound_value, style="dotted", color=REFERENCE_COLOR),
    ))
    kl = Panel("KL divergence to the optimum", "t", "KL", (
        Series("KL", t, trajectory.kl),
        Series("exponential bound", t, trajectory.linear_bound_kl, style="dotted", color=REFERENCE_COLOR),
    ))
    return (gap, kl)


# ==========================
# NPG REPRODUCTION
# ==========================
@dataclass(frozen=True)
class Figure:
    reward_s1_a2: float
    # draw exp(-delta_K t) next to exp(-delta t)
    kakade_reference: bool


FIGURES = {
    "fig2": Figure(reward_s1_a2=0.0, kakade_reference=False),
    "fig3": Figure(reward_s1_a2=3.0, kakade_reference=True),
}


@dataclass(frozen=True, eq=False)
class ReproResult:
    figure: str
    rates: object
    seeds: tuple
    stepsize: float
    runs: dict
    slopes: dict


def preconditioners_from_flag(flag):
    if flag is None:
        return (STATE_ACTION, KAKADE)
    if flag not in PRECONDITIONER_FLAGS:
        raise InstanceParseError(f"unknown preconditioner {flag!r}; expected one of {sorted(PRECONDITIONER_FLAGS)}")
    return (PRECONDITIONER_FLAGS[flag],)


def build_parametrization(flag, mdp):
    """``softmax``, ``escort:P`` or ``loglinear:PATH``."""
    kind, _, argument = flag.partition(":")
    try:
        if kind == SOFTMAX and not argument:
            return Parametrization.softmax(mdp.num_states, mdp.num_actions)
        if kind == ESCORT:
            return Parametrization.escort(mdp.num_states, mdp.num_actions, float(argument or 2.0))
        if kind == LOG_LINEAR and argument:
            return Parametrization.log_linear(load_features(argument, mdp.num_states, mdp.num_actions))
    except ValueError as exc:
        raise InstanceParseError(f"bad parametrization {flag!r}: {exc}") from exc
    raise InstanceParseError(f"unknown parametrization {flag!r}; expected softmax, escort:P or loglinear:PATH")


def run_repro(figure_id, seeds, *, stepsize=None, iters=None, preconditioners=(STATE_ACTION, KAKADE),
              parametrization=SOFTMAX, threads=None):
    if figure_id not in FIGURES:
        raise PreconditionError(f"unknown figure {figure_id!r}; expected one of {sorted(FIGURES)}")
    figure = FIGURES[figure_id]
    mdp = kakade_example(figure.reward_s1_a2)
    rates = mdp_rate_constants(mdp)
    par = build_parametrization(parametrization, mdp)

    overrides = {"stepsize": stepsize, "max_iters": iters}
    overrides = {key: value for key, value in overrides.items() if value is not None}
    runs, slopes = {}, {}
    for kind in preconditioners:
        cfg = NpgConfig.from_settings(preconditioner=kind, **overrides)
        runs[kind] = run_npg_seeds(mdp, par, cfg, seeds, threads=threads)
        slopes[kind] = np.array([tail_slope(log.kl, cfg.stepsize) for log in runs[kind]])
        logger.info("%s %s: KL tail slopes in [%.4g, %.4g]", figure_id, kind, slopes[kind].min(), slopes[kind].max())
    return ReproResult(
        figure=figure_id,
        rates=rates,
        seeds=tuple(seeds),
        stepsize=cfg.stepsize,
        runs=runs,
        slopes=slopes,
    )


def repro_panels(result):
    figure = FIGURES[result.figure]
    panels = []
    for column, title in (("gap", "Optimality gap"), ("kl", "KL divergence to the optimum")):
        series, start, times = [], 0.0, None
        for color_index, (kind, logs) in enumerate(result.runs.items()):
            for position, log in enumerate(logs):
                values = log.column(column)
                label = f"{kind} ({len(logs)} seeds)" if position == 0 else ""
                series.append(Series(label, log.times, values, color=PALETTE[color_index % len(PALETTE)],
                                     opacity=SEED_OPACITY))
                start = max(start, float(values[0]))
                times = log.times
        series.append(reference_series("exp(-delta t)", times, start, result.rates.delta_rate, "dashed"))
        if figure.kakade_reference:
            series.append(reference_series("exp(-delta_K t)", times, start, result.rates.delta_kakade, "dotted"))
        panels.append(Panel(title, "t = eta k", column, tuple(series)))
    return tuple(panels)


# ==========================
# GAMES
# ==========================
def compute_game_deviation(instance, *, stepsize=1e-3, iters=1000):
    if instance.kind != GAME:
        raise PreconditionError(f"{instance.name} is a {instance.kind} instance, not a game")
    return np.array(factor_flow_deviation(instance.program, stepsize=stepsize, iters=iters))


# ==========================
# MANIFESTS
# ==========================
def record_manifest(command, instance_path, overrides, output_dir, seeds=()):
    manifest = ExperimentManifest.objects.create(
        command=command,
        instance_path=str(instance_path),
        overrides=overrides,
        output_dir=str(output_dir),
        seeds=list(seeds),
        tool_version=frflow.__version__,
    )
    path = Path(output_dir) / "manifest.json"
    path.parent.mkdir(parents=True, exist_ok=True)
    payload = ExperimentManifestSerializer(manifest).data
    path.write_bytes(JSONRenderer().render(payload, renderer_context={"indent": 2}))
    logger.info("recorded manifest %d for %s %s", manifest.pk, command, instance_path)
    return manifest


def load_manifest(reference):
    """Fields of a recorded manifest, by database id or by ``manifest.json`` path."""
    reference = str(reference)
    if reference.isdigit():
        try:
            manifest = ExperimentManifest.objects.get(pk=int(reference))
        except ExperimentManifest.DoesNotExist:
            raise InstanceParseError(f"no recorded manifest with id {reference}") from None
        return dict(ExperimentManifestSerializer(manifest).data)

    path = Path(reference)
    if path.is_dir():
        path = path / "manifest.json"
    try:
        payload = JSONParser().parse(BytesIO(path.read_bytes()))
    except OSError as exc:
        raise InstanceParseError(f"cannot read manifest {path}: {exc}") from exc
    except ParseError as exc:
        raise InstanceParseError(f"{path}: {exc.detail}") from exc

    serializer = ExperimentManifestSerializer(data=payload)
    if not serializer.is_valid():
        field_name, errors = next(iter(serializer.errors.items()))
        raise InstanceParseError(f"{path}: {field_name}: {errors[0]}")
    return dict(serializer.validated_data)
