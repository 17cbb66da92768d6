"""Pareto Monte Carlo tree search with vector rewards, plus scalar UCT.

The search is written against a small duck-typed *context*:

``context.actions(pose)``
    feasible actions at ``pose``; each action has an ``end`` attribute that is
    the pose reached after executing it.
``context.reward(action, edge_index)``
    reward vector (1-D numpy array of length ``context.dim``) for executing
    ``action`` as the ``edge_index``-th edge below the root (root edges are 0).
``context.dim``
    reward dimensionality D.

A context may also offer ``random_action(pose, rng)`` (uniform over the
feasible actions, None at a dead end) as a fast path for rollouts.
"""

from __future__ import annotations

import csv
import math
import time
from dataclasses import dataclass

import numpy as np

from .errors import PlanningError

POLICIES = ("pareto_predictive", "pareto_current", "uct")


@dataclass(frozen=True)
class SearchBudget:
    max_iterations: int | None = 200
    max_wall_time: float | None = None  # seconds

    def __post_init__(self):
        if self.max_iterations is None and self.max_wall_time is None:
            raise ValueError("at least one budget bound must be set")
        if self.max_iterations is not None and self.max_iterations < 1:
            raise ValueError("max_iterations must be positive")


class TreeNode:
    __slots__ = (
        "pose",
        "action",
        "parent",
        "children",
        "untried",
        "visits",
        "cum_reward",
        "depth",
        "edge_reward",
    )

    def __init__(self, pose, untried, dim, action=None, parent=None, edge_reward=None):
        self.pose = pose
        self.action = action
        self.parent = parent
        self.children = []
        self.untried = list(untried)
        self.visits = 0
        self.cum_reward = np.zeros(dim)
        self.depth = 0 if parent is None else parent.depth + 1
        self.edge_reward = np.zeros(dim) if edge_reward is None else edge_reward

    @property
    def mean_reward(self):
        return self.cum_reward / self.visits

    def is_terminal(self):
        return not self.untried and not self.children

    def __repr__(self):
        return f"TreeNode(depth={self.depth}, visits={self.visits}, children={len(self.children)})"


# ---------------------------------------------------------------------------
# upper confidence bounds and Pareto fronts
# ---------------------------------------------------------------------------


def ucb_vector(cum_reward, visits, parent_visits, dim=None):
    """Mean reward plus the scalar bonus sqrt((4 ln n + ln D) / (2 n_k))."""
    r = np.asarray(cum_reward, dtype=float)
    d = r.size if dim is None else dim
    if visits < 1:
        raise ValueError("ucb of an unvisited node")
    bonus = math.sqrt((4.0 * math.log(parent_visits) + math.log(d)) / (2.0 * visits))
    return r / visits + bonus


def ucb_scalar(cum_reward, visits, parent_visits):
    if visits < 1:
        raise ValueError("ucb of an unvisited node")
    return cum_reward / visits + math.sqrt(2.0 * math.log(parent_visits) / visits)


def pareto_front_bruteforce(vectors):
    """Indices of non-dominated rows by pairwise comparison, ascending."""
    v = np.asarray(vectors, dtype=float)
    if v.size == 0:
        return []
    v = v.reshape(len(v), -1)
    front = []
    for i in range(len(v)):
        ge = np.all(v >= v[i], axis=1)
        gt = np.any(v > v[i], axis=1)
        if not np.any(ge & gt):
            front.append(i)
    return front


def pareto_front(vectors):
    """Indices of the Pareto-optimal rows (maximization), ascending.

    Two objectives use a sort-and-scan: rows are ordered by the first
    objective descending (second objective breaks ties, also descending),
    then a row joins the front if its second objective beats the best seen
    or it equals the current front leader exactly. Other dimensionalities
    fall back to pairwise dominance.
    """
    v = np.asarray(vectors, dtype=float)
    if v.size == 0:
        return []
    v = v.reshape(len(v), -1)
    if v.shape[1] != 2:
        return pareto_front_bruteforce(v)
    order = np.lexsort((-v[:, 1], -v[:, 0]))
    lead = v[order[0]]
    front = [int(order[0])]
    for i in order[1:]:
        row = v[i]
        if row[1] > lead[1]:
            lead = row
            front.append(int(i))
        elif row[0] == lead[0] and row[1] == lead[1]:
            front.append(int(i))
    front.sort()
    return front


# ---------------------------------------------------------------------------
# the four phases
# ---------------------------------------------------------------------------


def _pick(candidates, rng):
    if len(candidates) == 1:
        return candidates[0]
    return candidates[int(rng.integers(len(candidates)))]


def best_child(node: TreeNode, rng, policy="pareto_predictive"):
    kids = node.children
    n = node.visits
    if policy == "uct":
        scores = [ucb_scalar(float(c.cum_reward[0]), c.visits, n) for c in kids]
        top = max(scores)
        return kids[_pick([i for i, s in enumerate(scores) if s == top], rng)]
    dim = kids[0].cum_reward.size
    visits = np.array([c.visits for c in kids], dtype=float)
    cum = np.array([c.cum_reward for c in kids])
    # same arithmetic as ucb_vector, batched over children
    bonus = np.sqrt((4.0 * math.log(n) + math.log(dim)) / (2.0 * visits))
    u = cum / visits[:, None] + bonus[:, None]
    return kids[_pick(pareto_front(u), rng)]


def select(root: TreeNode, rng, policy="pareto_predictive") -> TreeNode:
    node = root
    while not node.untried and node.children:
        node = best_child(node, rng, policy)
    return node


def expand(node: TreeNode, context, rng) -> TreeNode:
    if not node.untried:
        raise RuntimeError("expand called on a fully expanded node")
    action = node.untried.pop(int(rng.integers(len(node.untried))))
    edge = context.reward(action, node.depth)
    child = TreeNode(action.end, context.actions(action.end), edge.size, action, node, edge)
    node.children.append(child)
    return child


def rollout(node: TreeNode, depth, context, rng):
    """Incoming-edge reward of ``node`` plus ``depth`` random actions."""
    total = node.edge_reward.copy()
    pose = node.pose
    draw = getattr(context, "random_action", None)
    for i in range(depth):
        if draw is not None:
            a = draw(pose, rng)
        else:
            acts = context.actions(pose)
            a = acts[int(rng.integers(len(acts)))] if acts else None
        if a is None:
            break
        total += context.reward(a, node.depth + i)
        pose = a.end
    return total


def backpropagate(leaf: TreeNode, reward):
    node = leaf
    while node is not None:
        node.visits += 1
        node.cum_reward += reward
        node = node.parent


def final_child(root: TreeNode) -> TreeNode:
    """Most visited member of the Pareto front of children's mean rewards."""
    kids = [c for c in root.children if c.visits > 0]
    means = np.array([c.mean_reward for c in kids])
    front = [kids[i] for i in pareto_front(means)]
    return max(front, key=lambda c: (c.visits, tuple(c.mean_reward)))


class _Normalized:
    """Divides every reward component by a fixed positive scale."""

    def __init__(self, context, scale):
        self._ctx = context
        self.scale = scale
        self.dim = context.dim

        if hasattr(context, "random_action"):
            self.random_action = context.random_action

    def actions(self, pose):
        return self._ctx.actions(pose)

    def reward(self, action, edge_index):
        return self._ctx.reward(action, edge_index) / self.scale


def reward_scale(context, actions):
    r = np.array([context.reward(a, 0) for a in actions])
    scale = np.max(np.abs(r), axis=0)
    # subnormal scales would overflow the division
    return np.where(scale >= np.finfo(float).tiny, scale, 1.0)


@dataclass
class SearchResult:
    action: object
    root: TreeNode
    iterations: int
    stats: list | None = None


def run_search(
    root_pose,
    budget: SearchBudget,
    context,
    policy="pareto_predictive",
    rng=None,
    rollout_depth=2,
    normalize=True,
    record_stats=False,
) -> SearchResult:
    if policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}")
    rng = np.random.default_rng() if rng is None else rng
    actions = context.actions(root_pose)
    if not actions:
        raise PlanningError("no feasible action at the root pose")
    if normalize:
        context = _Normalized(context, reward_scale(context, actions))
    root = TreeNode(root_pose, actions, context.dim)
    stats = [] if record_stats else None
    t_end = None if budget.max_wall_time is None else time.perf_counter() + budget.max_wall_time
    it = 0
    while True:
        if budget.max_iterations is not None and it >= budget.max_iterations:
            break
        if t_end is not None and it > 0 and time.perf_counter() >= t_end:
            break
        node = select(root, rng, policy)
        if node.untried:
            node = expand(node, context, rng)
        backpropagate(node, rollout(node, rollout_depth, context, rng))
        it += 1
        if stats is not None:
            for k, c in enumerate(root.children):
                stats.append((it, k, c.visits, *c.mean_reward.tolist()))
    return SearchResult(final_child(root).action, root, it, stats)


def search(root_pose, budget: SearchBudget, context, policy="pareto_predictive", rng=None, **kwargs):
    """Run a tree search and return the chosen root action."""
    return run_search(root_pose, budget, context, policy, rng, **kwargs).action


def write_tree_stats(path, stats, dim):
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["iteration", "child", "visits"] + [f"mean_{d}" for d in range(dim)])
        for row in stats:
            w.writerow([row[0], row[1], row[2]] + [repr(float(v)) for v in row[3:]])
