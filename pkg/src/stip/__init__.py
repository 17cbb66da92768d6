"""Spatiotemporal informative planning: a robot tracks a drifting hotspot.

The robot models the field with a Gaussian process, predicts its motion from
a noisy current forecast, and plans Dubins primitive paths with a Pareto
Monte Carlo tree search over hotspot-seeking and information rewards.
"""

from .environment import FlowField, HotspotState, Workspace, calibrate_spread
from .experiment import ExperimentConfig, MetricsRecord, run_experiment
from .geometry import PathLibrary, Pose, PrimitivePath, dubins_shortest_path, primitive_paths
from .gp import GaussianProcess, Hyperparams
from .mcts import SearchBudget, run_search, search

__all__ = [
    "ExperimentConfig",
    "FlowField",
    "GaussianProcess",
    "HotspotState",
    "Hyperparams",
    "MetricsRecord",
    "PathLibrary",
    "Pose",
    "PrimitivePath",
    "SearchBudget",
    "Workspace",
    "calibrate_spread",
    "dubins_shortest_path",
    "primitive_paths",
    "run_experiment",
    "run_search",
    "search",
]

__version__ = "0.1.0"
