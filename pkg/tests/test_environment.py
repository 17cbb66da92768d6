import math

import numpy as np
import pytest
from scipy import integrate

from stip.environment import (
    BASELINE_RMSE,
    FlowField,
    HotspotState,
    Workspace,
    calibrate_spread,
    current_forecast,
    current_true,
    ground_truth_field,
    hotspot_step,
    observe,
    observe_many,
    read_grid_csv,
    truth_grid,
    write_grid_csv,
    zero_prediction_rmse,
)
from stip.errors import OutOfBoundsError
from stip.geometry import Pose


def test_workspace_grid():
    ws = Workspace()
    assert ws.shape == (60, 60)
    assert ws.dx == ws.dy == 2.5
    assert ws.x_centers()[0] == -73.75 and ws.x_centers()[-1] == 73.75
    pts = ws.grid_points()
    # row-major with y as the slow index
    assert np.allclose(pts[1], [-71.25, -73.75])
    assert np.allclose(pts[60], [-73.75, -71.25])
    assert ws.contains((75.0, -75.0)) and not ws.contains((75.01, 0.0))
    with pytest.raises(ValueError):
        Workspace(1, 0, 0, 1)


def test_current_quarter_marks_exact():
    assert tuple(current_true(0)) == (5.0, 0.0)
    assert tuple(current_true(15)) == (0.0, 5.0)
    assert tuple(current_true(30)) == (-5.0, 0.0)
    assert tuple(current_true(45)) == (0.0, -5.0)
    assert tuple(current_true(60)) == (5.0, 0.0)
    v = current_true(7)
    assert np.allclose(v, [5 * math.cos(2 * math.pi * 7 / 60), 5 * math.sin(2 * math.pi * 7 / 60)], atol=1e-15)


def test_hotspot_loop_closes():
    s0 = HotspotState()
    s = s0
    for t in range(60):
        s = hotspot_step(s, t)
    assert abs(s.mean[0] - s0.mean[0]) < 1e-9
    assert abs(s.mean[1] - s0.mean[1]) < 1e-9


def test_forecast_noise_statistics():
    rng = np.random.default_rng(4)
    draws = np.array([current_forecast(15, rng) for _ in range(40000)])
    err = draws - current_true(15)
    # variance 0.2 per component; 5-sigma bounds on the sample moments
    assert np.all(np.abs(err.mean(axis=0)) < 5 * math.sqrt(0.2 / 40000))
    assert np.all(np.abs(err.var(axis=0) - 0.2) < 5 * 0.2 * math.sqrt(2 / 40000))
    assert abs(np.corrcoef(err.T)[0, 1]) < 0.03


def test_forecast_noise_as_std():
    f = FlowField(noise=0.2, noise_is_variance=False)
    assert f.noise_std == 0.2
    assert np.array_equal(FlowField(noise=0.0).current_forecast(3, None), current_true(3))


def test_truth_field_pdf_normalized():
    s = HotspotState((1.0, 2.0), 3.0)
    total, _ = integrate.dblquad(
        lambda y, x: ground_truth_field(s, [(x, y)])[0], -30, 30, -30, 30, epsabs=1e-10
    )
    assert total == pytest.approx(1.0, abs=1e-8)
    assert ground_truth_field(HotspotState((0, 0), 3.0, "unit"), [(0, 0)])[0] == 1.0


def test_calibration_reproduces_baseline():
    sigma = calibrate_spread()
    assert abs(zero_prediction_rmse(sigma) - BASELINE_RMSE) < 1e-6
    assert sigma == pytest.approx(7.3750248266626794, rel=1e-10)
    # continuous approximation: RMS of a pdf over a 150 m square is 1 / (300 sqrt(pi) sigma)
    assert sigma == pytest.approx(1 / (300 * math.sqrt(math.pi) * BASELINE_RMSE), rel=1e-4)
    assert HotspotState().spread_sigma == sigma


def test_observation_noise_and_bounds():
    s = HotspotState()
    rng = np.random.default_rng(0)
    v = np.array([observe(Pose(0, -50, 0), s, rng) for _ in range(20000)])
    assert v.mean() == pytest.approx(s.amplitude, abs=5e-6)
    assert v.std() == pytest.approx(1e-4, rel=0.03)
    assert observe((0, -50), s, rng, noise_std=0.0) == s.amplitude
    with pytest.raises(OutOfBoundsError):
        observe((80, 0), s, rng, workspace=Workspace())
    with pytest.raises(OutOfBoundsError):
        observe_many([(0, 0), (0, 90)], s, rng, workspace=Workspace())
    assert observe_many([(0, -50), (1, -50)], s, rng, noise_std=0).shape == (2,)


def test_grid_csv_round_trip(tmp_path):
    ws = Workspace(0, 10, 0, 5, 4, 2)
    vals = np.arange(8.0).reshape(2, 4) / 7.0
    write_grid_csv(tmp_path / "g.csv", ws, vals)
    lines = (tmp_path / "g.csv").read_text().splitlines()
    assert lines[0] == "y\\x,1.25,3.75,6.25,8.75"
    assert lines[1].startswith("1.25,0.0,")
    xs, ys, back = read_grid_csv(tmp_path / "g.csv")
    assert np.array_equal(xs, ws.x_centers()) and np.array_equal(ys, ws.y_centers())
    assert np.array_equal(back, vals)


def test_truth_grid_shape_and_peak():
    g = truth_grid(HotspotState(), Workspace())
    iy, ix = np.unravel_index(np.argmax(g), g.shape)
    ws = Workspace()
    assert abs(ws.x_centers()[ix]) < 2.5 and abs(ws.y_centers()[iy] + 50) < 2.5
