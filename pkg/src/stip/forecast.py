"""Environment prediction by median-threshold advection of the GP estimate."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import _accel
from .environment import FlowField, Workspace


@dataclass(frozen=True, eq=False)
class ScalarField:
    workspace: Workspace
    values: np.ndarray  # (ny, nx), row index is y

    def __post_init__(self):
        v = np.asarray(self.values, dtype=float).reshape(self.workspace.shape)
        if not np.all(np.isfinite(v)):
            raise ValueError("field values must be finite")
        object.__setattr__(self, "values", v)
        ws = self.workspace
        object.__setattr__(self, "_grid", (ws.x_min + 0.5 * ws.dx, ws.y_min + 0.5 * ws.dy, ws.dx, ws.dy))
        object.__setattr__(self, "_bounds", np.array([ws.x_min, ws.x_max, ws.y_min, ws.y_max]))
        object.__setattr__(self, "_min", float(v.min()))

    def sample(self, points):
        """Bilinear interpolation between cell centers; outside points score the minimum."""
        pts = np.ascontiguousarray(points, dtype=float).reshape(-1, 2)
        out = _accel.bilinear(self.values, *self._grid, pts)
        inside = self.workspace.contains(pts)
        if not np.all(inside):
            out = np.where(inside, out, self._min)
        return out

    def sample_mean(self, points):
        """``mean(self.sample(points))`` in a single kernel call."""
        pts = np.ascontiguousarray(points, dtype=float).reshape(-1, 2)
        return _accel.bilinear_mean(self.values, *self._grid, pts, self._bounds, self._min)


@dataclass(frozen=True, eq=False)
class ForecastSequence:
    base_time: int
    fields: tuple

    @property
    def horizon(self):
        return len(self.fields) - 1

    def at(self, s):
        return self.fields[min(max(int(s), 0), self.horizon)]


def advect_once(field: ScalarField, current) -> ScalarField:
    cur = np.asarray(current, dtype=float)
    if not np.all(np.isfinite(cur)):
        raise ValueError("current must be finite")
    ws = field.workspace
    out = _accel.advect(field.values, float(cur[0]), float(cur[1]), ws.dx, ws.dy)
    return ScalarField(ws, out)


def gp_mean_field(gp, workspace: Workspace) -> ScalarField:
    return ScalarField(workspace, gp.predict_mean(workspace.grid_points()))


def predict_sequence(gp, flow: FlowField, t0, tau, rng, workspace: Workspace) -> ForecastSequence:
    """GP mean at ``t0`` followed by ``tau`` advections with forecast currents.

    One forecast noise draw is made per advection step.
    """
    if tau < 0:
        raise ValueError("tau must be >= 0")
    fields = [gp_mean_field(gp, workspace)]
    for s in range(tau):
        fields.append(advect_once(fields[-1], flow.current_forecast(t0 + s, rng)))
    return ForecastSequence(int(t0), tuple(fields))
