"""End-to-end hotspot monitoring experiment and its metrics."""

from __future__ import annotations

import csv
import dataclasses
import logging
import math
from dataclasses import dataclass, field, fields
from pathlib import Path

import numpy as np

from .environment import (
    BASELINE_RMSE,
    FlowField,
    HotspotState,
    Workspace,
    calibrate_spread,
    hotspot_step,
    observe_many,
    truth_grid,
)
from .errors import ConfigError, DimensionError, PlanningError
from .forecast import ScalarField, gp_mean_field, predict_sequence
from .geometry import PathLibrary, Pose
from .gp import GaussianProcess, HyperBounds, Hyperparams
from .mcts import SearchBudget, run_search
from .planning import PLANNER_POLICIES, InformativeContext

log = logging.getLogger(__name__)

METRICS_HEADER = ["time_step", "rmse", "distance", "planner", "seed", "sigma_f2", "length_scale", "noise_var"]

INF = math.inf


@dataclass
class ExperimentConfig:
    x_min: float = -75.0
    x_max: float = 75.0
    y_min: float = -75.0
    y_max: float = 75.0
    grid_nx: int = 60
    grid_ny: int = 60
    hotspot_x: float = 0.0
    hotspot_y: float = -50.0
    spread_sigma: float | None = None  # None: calibrate to baseline_rmse
    amplitude_mode: str = "pdf"
    baseline_rmse: float = BASELINE_RMSE
    robot_x: float = -20.0
    robot_y: float = -40.0
    robot_heading: float = 0.0
    flow_magnitude: float = 5.0
    flow_period: int = 60
    flow_noise: float = 0.2
    flow_noise_is_variance: bool = True
    observation_noise_std: float = 1e-4
    actions_per_step: int = 5
    time_steps: int = 60
    horizon: int = 1  # look-ahead fields, one per environment time step
    planner: str = "predictive"
    iterations: int = 200
    rollout_depth: int = 2
    normalize_rewards: bool = True
    weight_hotspot: float = 1.0
    weight_info: float = 1.0
    primitive_count: int = 11
    primitive_length: float = 2.5
    turning_radius: float = 0.5
    sampling_points: int = 5
    rear_delta: float | None = None  # None: pi / primitive_count
    gp_signal_var: float = 1.0
    gp_length_scale: float = 10.0
    gp_noise_var: float = 1e-2
    gp_standardize: str = "scale"
    gp_signal_var_min: float = 1e-3
    gp_signal_var_max: float = 1e3
    gp_length_scale_min: float = 0.5
    gp_length_scale_max: float = 150.0
    gp_noise_var_min: float = 1e-6
    gp_noise_var_max: float = 10.0
    optimize_hyper: bool = True
    seed: int = 0

    # key -> (low, high) inclusive numeric ranges or a tuple of choices
    _RANGES = {
        "grid_nx": (1, 10_000),
        "grid_ny": (1, 10_000),
        "spread_sigma": (1e-9, INF),
        "amplitude_mode": ("pdf", "unit"),
        "baseline_rmse": (1e-12, INF),
        "flow_magnitude": (0.0, INF),
        "flow_period": (1, 10**9),
        "flow_noise": (0.0, INF),
        "observation_noise_std": (0.0, INF),
        "actions_per_step": (1, 10**6),
        "time_steps": (0, 10**6),
        "horizon": (0, 10**4),
        "planner": tuple(PLANNER_POLICIES),
        "iterations": (1, 10**9),
        "rollout_depth": (0, 10**4),
        "weight_hotspot": (1e-300, INF),
        "weight_info": (1e-300, INF),
        "primitive_count": (1, 10**4),
        "primitive_length": (1e-9, INF),
        "turning_radius": (1e-9, INF),
        "sampling_points": (1, 10**4),
        "rear_delta": (0.0, math.pi),
        "gp_signal_var": (1e-300, INF),
        "gp_length_scale": (1e-300, INF),
        "gp_noise_var": (0.0, INF),
        "gp_standardize": ("scale", "center", "none"),
        "gp_signal_var_min": (1e-300, INF),
        "gp_signal_var_max": (1e-300, INF),
        "gp_length_scale_min": (1e-300, INF),
        "gp_length_scale_max": (1e-300, INF),
        "gp_noise_var_min": (1e-300, INF),
        "gp_noise_var_max": (1e-300, INF),
        "seed": (0, 2**64 - 1),
    }

    def validate(self):
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                continue
            if isinstance(v, float) and not math.isfinite(v):
                raise ConfigError(f.name, f"must be finite, got {v!r}")
            rule = self._RANGES.get(f.name)
            if rule is None:
                continue
            if isinstance(rule[0], str):
                if v not in rule:
                    raise ConfigError(f.name, f"must be one of {', '.join(rule)}, got {v!r}")
            elif not (rule[0] <= v <= rule[1]):
                raise ConfigError(f.name, f"must lie in [{rule[0]}, {rule[1]}], got {v!r}")
        if not (self.x_min < self.x_max):
            raise ConfigError("x_min", f"must be < x_max ({self.x_max}), got {self.x_min}")
        if not (self.y_min < self.y_max):
            raise ConfigError("y_min", f"must be < y_max ({self.y_max}), got {self.y_min}")
        for name in ("gp_signal_var", "gp_length_scale", "gp_noise_var"):
            lo, hi = getattr(self, name + "_min"), getattr(self, name + "_max")
            if lo > hi:
                raise ConfigError(name + "_min", f"must be <= {name}_max ({hi}), got {lo}")
        ws = self.workspace()
        if not ws.contains((self.robot_x, self.robot_y)):
            raise ConfigError("robot_x", f"robot start must lie in [{self.x_min}, {self.x_max}] x [{self.y_min}, {self.y_max}]")
        return self

    # -- derived objects -----------------------------------------------------

    def workspace(self):
        return Workspace(self.x_min, self.x_max, self.y_min, self.y_max, self.grid_nx, self.grid_ny)

    def flow(self):
        return FlowField(self.flow_magnitude, self.flow_period, self.flow_noise, self.flow_noise_is_variance)

    def resolved_spread(self):
        if self.spread_sigma is not None:
            return self.spread_sigma
        return calibrate_spread(self.baseline_rmse, self.workspace(), (self.hotspot_x, self.hotspot_y), self.amplitude_mode)

    def hotspot(self):
        return HotspotState((self.hotspot_x, self.hotspot_y), self.resolved_spread(), self.amplitude_mode)

    def library(self):
        return PathLibrary(self.primitive_count, self.primitive_length, self.turning_radius, self.sampling_points, self.rear_delta)

    def gp(self):
        bounds = HyperBounds(
            (self.gp_signal_var_min, self.gp_signal_var_max),
            (self.gp_length_scale_min, self.gp_length_scale_max),
            (self.gp_noise_var_min, self.gp_noise_var_max),
        )
        return GaussianProcess(Hyperparams(self.gp_signal_var, self.gp_length_scale, self.gp_noise_var), self.gp_standardize, bounds)

    # -- flat key = value text ---------------------------------------------

    def to_text(self):
        lines = []
        for f in fields(self):
            v = getattr(self, f.name)
            if v is None:
                s = "auto"
            elif isinstance(v, bool):
                s = "true" if v else "false"
            elif isinstance(v, float):
                s = repr(v)
            else:
                s = str(v)
            lines.append(f"{f.name} = {s}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text, base=None):
        cfg = dataclasses.replace(base) if base is not None else cls()
        for lineno, raw in enumerate(text.splitlines(), 1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ConfigError(f"line {lineno}", f"expected 'key = value', got {raw!r}")
            key, value = (p.strip() for p in line.split("=", 1))
            cfg.set(key, value)
        return cfg

    def set(self, key, value):
        types = {f.name: f.type for f in fields(self)}
        if key not in types:
            raise ConfigError(key, "unknown config key")
        typ = str(types[key])
        if isinstance(value, str):
            value = _parse_value(key, typ, value)
        setattr(self, key, value)
        return self


def _parse_value(key, typ, text):
    t = text.strip()
    if t.lower() == "auto" and "None" in typ:
        return None
    try:
        if typ.startswith("bool"):
            if t.lower() in ("1", "true", "yes", "on"):
                return True
            if t.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError(t)
        if typ.startswith("int"):
            return int(t)
        if typ.startswith("float"):
            return float(t)
    except ValueError:
        raise ConfigError(key, f"cannot parse {text!r} as {typ.split(' ')[0]}") from None
    return t


def load_config(path, overrides=None):
    cfg = ExperimentConfig.from_text(Path(path).read_text())
    for k, v in (overrides or {}).items():
        if v is not None:
            cfg.set(k, v)
    return cfg.validate()


# ---------------------------------------------------------------------------
# metrics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MetricsRecord:
    time_step: int
    rmse: float
    distance: float
    planner: str
    seed: int
    sigma_f2: float
    length_scale: float
    noise_var: float

    def row(self):
        return [
            str(self.time_step),
            repr(float(self.rmse)),
            repr(float(self.distance)),
            self.planner,
            str(self.seed),
            repr(float(self.sigma_f2)),
            repr(float(self.length_scale)),
            repr(float(self.noise_var)),
        ]


def rmse(estimate, truth):
    a = estimate.values if isinstance(estimate, ScalarField) else np.asarray(estimate, dtype=float)
    b = truth.values if isinstance(truth, ScalarField) else np.asarray(truth, dtype=float)
    if a.shape != b.shape:
        raise DimensionError(f"grid mismatch {a.shape} vs {b.shape}")
    return float(np.sqrt(np.mean((a - b) ** 2)))


def distance_to_hotspot(pose, state: HotspotState):
    x, y = (pose.x, pose.y) if hasattr(pose, "x") else (pose[0], pose[1])
    return float(math.hypot(x - state.mean[0], y - state.mean[1]))


def write_metrics(path, records):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(METRICS_HEADER)
        for r in records:
            w.writerow(r.row())


def read_metrics(path):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    return [
        MetricsRecord(
            int(r["time_step"]),
            float(r["rmse"]),
            float(r["distance"]),
            r["planner"],
            int(r["seed"]),
            float(r["sigma_f2"]),
            float(r["length_scale"]),
            float(r["noise_var"]),
        )
        for r in rows
    ]


# ---------------------------------------------------------------------------
# the experiment loop
# ---------------------------------------------------------------------------


@dataclass
class StepSnapshot:
    """What a run looked like at the end of one time step."""

    time_step: int
    estimate: ScalarField
    truth: ScalarField
    hotspot: HotspotState
    trajectory: list = field(default_factory=list)


def run_experiment(config: ExperimentConfig, on_step=None, on_search=None, record_stats=False):
    """Run one planner for ``config.time_steps`` steps; returns MetricsRecords.

    ``on_step(snapshot)`` is called at the end of every time step and
    ``on_search(t, s, result, forecast)`` after every tree search (with
    ``result.stats`` filled when ``record_stats`` is set). On a
    planning failure a PlanningError is raised whose ``records`` attribute
    holds the metrics gathered so far.
    """
    config.validate()
    policy = PLANNER_POLICIES[config.planner]
    ws = config.workspace()
    flow = config.flow()
    state = config.hotspot()
    library = config.library()
    gp = config.gp()
    budget = SearchBudget(config.iterations)
    weights = (config.weight_hotspot, config.weight_info)
    tau = config.horizon if policy == "pareto_predictive" else 0

    seq = np.random.SeedSequence(config.seed)
    obs_rng, plan_rng, fc_rng = (np.random.default_rng(s) for s in seq.spawn(3))

    pose = Pose(config.robot_x, config.robot_y, config.robot_heading)
    records = []
    for t in range(config.time_steps):
        gp.reset()
        trajectory = [pose]
        for s in range(config.actions_per_step):
            forecast = predict_sequence(gp, flow, t, tau, fc_rng, ws)
            ctx = InformativeContext(gp, forecast, ws, library, policy, s, weights)
            try:
                result = run_search(
                    pose, budget, ctx, policy, plan_rng, config.rollout_depth, config.normalize_rewards, record_stats
                )
            except PlanningError as exc:
                exc.records = records
                raise
            if on_search is not None:
                on_search(t, s, result, forecast)
            path = result.action
            values = observe_many(path.points, state, obs_rng, config.observation_noise_std, ws)
            gp.add_data(path.points, values)
            if config.optimize_hyper and gp.n >= 2:
                gp.optimize_hyperparams()
            pose = path.end
            trajectory.append(pose)
        estimate = gp_mean_field(gp, ws)
        truth = ScalarField(ws, truth_grid(state, ws))
        h = gp.hyper
        records.append(
            MetricsRecord(
                t,
                rmse(estimate, truth),
                distance_to_hotspot(pose, state),
                config.planner,
                config.seed,
                h.signal_var,
                h.length_scale,
                h.noise_var,
            )
        )
        if on_step is not None:
            on_step(StepSnapshot(t, estimate, truth, state, trajectory))
        state = hotspot_step(state, t, flow)
    return records
