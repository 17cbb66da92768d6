"""Hotspot-seeking and information (average reduction in variance) rewards."""

from __future__ import annotations

import numpy as np

from .forecast import ForecastSequence


def hotspot_reward(path, forecast: ForecastSequence, s) -> float:
    """Mean of the ``s``-step look-ahead field over the path's sampling points.

    ``s`` is clamped to the forecast horizon.
    """
    return float(forecast.at(s).sample_mean(path.points))


def arv_reward(path, gp) -> float:
    """Average per-point reduction of posterior variance from sampling ``path``."""
    pts = path.points
    return gp.variance_reduction(pts) / pts.shape[0]


def reward_vector(path, forecast: ForecastSequence, gp, s, weights=(1.0, 1.0)):
    return np.array(
        [weights[0] * hotspot_reward(path, forecast, s), weights[1] * arv_reward(path, gp)]
    )
