"""Search context binding the GP, forecast and path library to the tree search."""

from __future__ import annotations

import numpy as np

from .geometry import PathLibrary, Pose
from .rewards import arv_reward, hotspot_reward

PLANNER_POLICIES = {
    "uct": "uct",
    "pareto": "pareto_current",
    "predictive": "pareto_predictive",
}


class InformativeContext:
    """Rewards for one planning invocation.

    ``s_offset`` is the number of actions already executed in the current
    time step; the edge at depth ``d`` below the root scores against the
    ``s_offset + d`` look-ahead field (clamped to the horizon). ``uct`` only
    sees the information reward; ``pareto_current`` always uses the current
    estimate. With ``avoid_dead_ends`` the tree never expands into a pose
    from which no feasible path leaves (rollouts are unaffected).
    """

    def __init__(self, gp, forecast, workspace, library: PathLibrary, policy, s_offset=0, weights=(1.0, 1.0), avoid_dead_ends=True):
        self.gp = gp
        self.forecast = forecast
        self.workspace = workspace
        self.library = library
        self.policy = policy
        self.s_offset = s_offset
        self.weights = weights
        self.avoid_dead_ends = avoid_dead_ends
        self.dim = 1 if policy == "uct" else 2
        self.bounds = (workspace.x_min, workspace.x_max, workspace.y_min, workspace.y_max)

    def actions(self, pose: Pose):
        if self.avoid_dead_ends:
            return self.library.safe_paths_at(pose, self.bounds)
        return self.library.paths_at(pose, self.bounds)

    def random_action(self, pose: Pose, rng):
        return self.library.random_path(pose, rng, self.bounds)

    def reward(self, path, edge_index):
        info = self.weights[1] * arv_reward(path, self.gp)
        if self.policy == "uct":
            return np.array([info])
        s = 0 if self.policy == "pareto_current" else self.s_offset + edge_index
        return np.array([self.weights[0] * hotspot_reward(path, self.forecast, s), info])
