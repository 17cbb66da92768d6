"""Ground-truth world: rotating current, advected Gaussian hotspot, sensing."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass, replace

import numpy as np
from scipy.optimize import brentq

from .errors import OutOfBoundsError

BASELINE_RMSE = 0.000255


@dataclass(frozen=True)
class Workspace:
    x_min: float = -75.0
    x_max: float = 75.0
    y_min: float = -75.0
    y_max: float = 75.0
    grid_nx: int = 60
    grid_ny: int = 60

    def __post_init__(self):
        if not (self.x_min < self.x_max and self.y_min < self.y_max):
            raise ValueError("workspace bounds must satisfy min < max")
        if self.grid_nx < 1 or self.grid_ny < 1:
            raise ValueError("grid sizes must be positive")

    @property
    def dx(self):
        return (self.x_max - self.x_min) / self.grid_nx

    @property
    def dy(self):
        return (self.y_max - self.y_min) / self.grid_ny

    @property
    def shape(self):
        return (self.grid_ny, self.grid_nx)

    def x_centers(self):
        return self.x_min + (np.arange(self.grid_nx) + 0.5) * self.dx

    def y_centers(self):
        return self.y_min + (np.arange(self.grid_ny) + 0.5) * self.dy

    def grid_points(self):
        """Cell centers as an (ny * nx, 2) array in row-major (y-major) order."""
        xx, yy = np.meshgrid(self.x_centers(), self.y_centers())
        return np.column_stack([xx.ravel(), yy.ravel()])

    def contains(self, points):
        p = np.asarray(points, dtype=float)
        return (
            (p[..., 0] >= self.x_min)
            & (p[..., 0] <= self.x_max)
            & (p[..., 1] >= self.y_min)
            & (p[..., 1] <= self.y_max)
        )


def _unit_circle(k, period):
    # exact values on the quarter-period marks so (5, 0), (0, 5), ... are exact
    q, r = divmod(4 * k, period)
    if r == 0:
        return ((1.0, 0.0), (0.0, 1.0), (-1.0, 0.0), (0.0, -1.0))[q % 4]
    phase = 2.0 * math.pi * k / period
    return math.cos(phase), math.sin(phase)


@dataclass(frozen=True)
class FlowField:
    """Spatially uniform current rotating with a fixed period.

    ``noise`` is the variance of each forecast error component, or its
    standard deviation when ``noise_is_variance`` is False.
    """

    magnitude: float = 5.0
    period: int = 60
    noise: float = 0.2
    noise_is_variance: bool = True

    def __post_init__(self):
        if self.magnitude < 0 or self.period < 1 or self.noise < 0:
            raise ValueError("invalid flow parameters")

    @property
    def noise_std(self):
        return math.sqrt(self.noise) if self.noise_is_variance else self.noise

    def current_true(self, t):
        if t < 0:
            raise ValueError("t must be >= 0")
        c, s = _unit_circle(int(t) % self.period, self.period)
        return np.array([self.magnitude * c, self.magnitude * s])

    def current_forecast(self, t, rng):
        v = self.current_true(t)
        if self.noise == 0:
            return v
        return v + rng.normal(0.0, self.noise_std, size=2)


@dataclass(frozen=True)
class HotspotState:
    mean: tuple = (0.0, -50.0)
    spread_sigma: float = 7.3750248266626794  # calibrate_spread() on the default grid
    amplitude_mode: str = "pdf"

    def __post_init__(self):
        if self.spread_sigma <= 0:
            raise ValueError("spread_sigma must be positive")
        if self.amplitude_mode not in ("pdf", "unit"):
            raise ValueError("amplitude_mode must be 'pdf' or 'unit'")
        object.__setattr__(self, "mean", tuple(float(v) for v in self.mean))

    @property
    def amplitude(self):
        if self.amplitude_mode == "unit":
            return 1.0
        return 1.0 / (2.0 * math.pi * self.spread_sigma**2)


def current_true(t, flow: FlowField = FlowField()):
    return flow.current_true(t)


def current_forecast(t, rng, flow: FlowField = FlowField()):
    return flow.current_forecast(t, rng)


def hotspot_step(state: HotspotState, t, flow: FlowField = FlowField()) -> HotspotState:
    v = flow.current_true(t)
    return replace(state, mean=(state.mean[0] + v[0], state.mean[1] + v[1]))


def ground_truth_field(state: HotspotState, points):
    p = np.atleast_2d(np.asarray(points, dtype=float))
    d2 = (p[:, 0] - state.mean[0]) ** 2 + (p[:, 1] - state.mean[1]) ** 2
    return state.amplitude * np.exp(-d2 / (2.0 * state.spread_sigma**2))


def truth_grid(state: HotspotState, workspace: Workspace):
    return ground_truth_field(state, workspace.grid_points()).reshape(workspace.shape)


def observe(pose, state: HotspotState, rng, noise_std=1e-4, workspace: Workspace | None = None):
    if hasattr(pose, "x"):
        x, y = pose.x, pose.y
    else:
        x, y = float(pose[0]), float(pose[1])
    if workspace is not None and not workspace.contains((x, y)):
        raise OutOfBoundsError(f"observation at ({x}, {y}) outside workspace")
    value = float(ground_truth_field(state, [(x, y)])[0])
    if noise_std > 0:
        value += float(rng.normal(0.0, noise_std))
    return value


def observe_many(points, state: HotspotState, rng, noise_std=1e-4, workspace: Workspace | None = None):
    p = np.atleast_2d(np.asarray(points, dtype=float))
    if workspace is not None and not np.all(workspace.contains(p)):
        raise OutOfBoundsError("observation outside workspace")
    values = ground_truth_field(state, p)
    if noise_std > 0:
        values = values + rng.normal(0.0, noise_std, size=len(values))
    return values


def zero_prediction_rmse(spread_sigma, workspace: Workspace = Workspace(), mean=(0.0, -50.0), mode="pdf"):
    """RMSE of the all-zero estimate against the hotspot on the metric grid."""
    f = ground_truth_field(HotspotState(mean, spread_sigma, mode), workspace.grid_points())
    return float(np.sqrt(np.mean(f * f)))


def calibrate_spread(
    target_rmse=BASELINE_RMSE,
    workspace: Workspace = Workspace(),
    mean=(0.0, -50.0),
    mode="pdf",
    bracket=(2.0, 60.0),
):
    """Hotspot spread whose all-zero prediction RMSE equals ``target_rmse``."""
    lo, hi = bracket
    g = lambda s: zero_prediction_rmse(s, workspace, mean, mode) - target_rmse
    return brentq(g, lo, hi, xtol=1e-14, rtol=1e-14, maxiter=200)


def write_grid_csv(path, workspace: Workspace, values):
    """Row-major grid: header of x centers, first column holds y centers."""
    values = np.asarray(values, dtype=float).reshape(workspace.shape)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["y\\x"] + [repr(float(x)) for x in workspace.x_centers()])
        for y, row in zip(workspace.y_centers(), values):
            w.writerow([repr(float(y))] + [repr(float(v)) for v in row])


def read_grid_csv(path):
    """Returns ``(x_centers, y_centers, values)``."""
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    xs = np.array([float(v) for v in rows[0][1:]])
    ys = np.array([float(r[0]) for r in rows[1:]])
    vals = np.array([[float(v) for v in r[1:]] for r in rows[1:]])
    return xs, ys, vals
