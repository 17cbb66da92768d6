"""Dubins shortest paths and the primitive-path action set."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .errors import EmptyActionSetError, ZeroLengthPathError

TWO_PI = 2.0 * math.pi

WORDS = ("LSL", "RSR", "LSR", "RSL", "RLR", "LRL")


def mod2pi(theta):
    r = math.fmod(theta, TWO_PI)
    if r < 0.0:
        r += TWO_PI
    # fmod can return exactly 2*pi after the shift for tiny negatives
    return 0.0 if r >= TWO_PI else r


@dataclass(frozen=True)
class Pose:
    x: float
    y: float
    heading: float = 0.0

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y) and math.isfinite(self.heading)):
            raise ValueError(f"non-finite pose {self.x, self.y, self.heading}")
        object.__setattr__(self, "x", float(self.x))
        object.__setattr__(self, "y", float(self.y))
        object.__setattr__(self, "heading", mod2pi(float(self.heading)))

    @property
    def xy(self):
        return np.array([self.x, self.y])

    def as_array(self):
        return np.array([self.x, self.y, self.heading])

    @classmethod
    def _trusted(cls, x, y, heading):
        # caller guarantees finite values and heading already in [0, 2pi)
        p = object.__new__(cls)
        p.__dict__.update(x=float(x), y=float(y), heading=float(heading))
        return p


@dataclass(eq=False, slots=True)
class PrimitivePath:
    """One Dubins action.

    ``sampling_points`` is an (m, 3) array of (x, y, heading) rows placed at
    arc lengths ``length * i / m`` for ``i = 1..m``; the start pose is not a
    sampling point because it was sampled by the previous action.
    """

    start: Pose
    end: Pose
    length: float
    sampling_points: np.ndarray
    turning_radius: float
    word: str = ""
    segments: tuple = field(default=(), repr=False)

    @property
    def points(self):
        return self.sampling_points[:, :2]

    @property
    def m(self):
        return self.sampling_points.shape[0]


def _word_lsl(a, b, d, sa, sb, ca, cb, cab):
    tmp0 = d + sa - sb
    p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sa - sb)
    if p2 < 0.0:
        return None
    tmp1 = math.atan2(cb - ca, tmp0)
    return mod2pi(-a + tmp1), math.sqrt(p2), mod2pi(b - tmp1)


def _word_rsr(a, b, d, sa, sb, ca, cb, cab):
    tmp0 = d - sa + sb
    p2 = 2.0 + d * d - 2.0 * cab + 2.0 * d * (sb - sa)
    if p2 < 0.0:
        return None
    tmp1 = math.atan2(ca - cb, tmp0)
    return mod2pi(a - tmp1), math.sqrt(p2), mod2pi(-b + tmp1)


def _word_lsr(a, b, d, sa, sb, ca, cb, cab):
    p2 = -2.0 + d * d + 2.0 * cab + 2.0 * d * (sa + sb)
    if p2 < 0.0:
        return None
    p = math.sqrt(p2)
    tmp = math.atan2(-ca - cb, d + sa + sb) - math.atan2(-2.0, p)
    return mod2pi(-a + tmp), p, mod2pi(-b + tmp)


def _word_rsl(a, b, d, sa, sb, ca, cb, cab):
    p2 = -2.0 + d * d + 2.0 * cab - 2.0 * d * (sa + sb)
    if p2 < 0.0:
        return None
    p = math.sqrt(p2)
    tmp = math.atan2(ca + cb, d - sa - sb) - math.atan2(2.0, p)
    return mod2pi(a - tmp), p, mod2pi(b - tmp)


def _word_rlr(a, b, d, sa, sb, ca, cb, cab):
    tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sa - sb)) / 8.0
    if abs(tmp) > 1.0:
        return None
    p = mod2pi(TWO_PI - math.acos(tmp))
    t = mod2pi(a - math.atan2(ca - cb, d - sa + sb) + p / 2.0)
    return t, p, mod2pi(a - b - t + p)


def _word_lrl(a, b, d, sa, sb, ca, cb, cab):
    tmp = (6.0 - d * d + 2.0 * cab + 2.0 * d * (sb - sa)) / 8.0
    if abs(tmp) > 1.0:
        return None
    p = mod2pi(TWO_PI - math.acos(tmp))
    t = mod2pi(-a - math.atan2(ca - cb, d + sa - sb) + p / 2.0)
    return t, p, mod2pi(b - a - t + p)


_SOLVERS = {
    "LSL": _word_lsl,
    "RSR": _word_rsr,
    "LSR": _word_lsr,
    "RSL": _word_rsl,
    "RLR": _word_rlr,
    "LRL": _word_lrl,
}


def dubins_words(start: Pose, end: Pose, r_min: float):
    """Normalized segment lengths (t, p, q) for every feasible word.

    Returns a dict ``word -> (t, p, q)``; multiply the sum by ``r_min`` to get
    the metric length.
    """
    dx = end.x - start.x
    dy = end.y - start.y
    d = math.hypot(dx, dy) / r_min
    phi = math.atan2(dy, dx) if d > 0 else 0.0
    a = mod2pi(start.heading - phi)
    b = mod2pi(end.heading - phi)
    sa, sb, ca, cb = math.sin(a), math.sin(b), math.cos(a), math.cos(b)
    cab = math.cos(a - b)
    out = {}
    for word in WORDS:
        res = _SOLVERS[word](a, b, d, sa, sb, ca, cb, cab)
        if res is not None:
            out[word] = res
    return out


def _advance(x, y, h, kind, u, r):
    if kind == "L":
        return x + r * (math.sin(h + u) - math.sin(h)), y - r * (math.cos(h + u) - math.cos(h)), h + u
    if kind == "R":
        return x - r * (math.sin(h - u) - math.sin(h)), y + r * (math.cos(h - u) - math.cos(h)), h - u
    return x + r * u * math.cos(h), y + r * u * math.sin(h), h


def pose_along(start: Pose, word: str, segments, r_min: float, s: float):
    """Pose after travelling arc length ``s`` along a Dubins word."""
    x, y, h = start.x, start.y, start.heading
    remaining = s / r_min
    for kind, u in zip(word, segments):
        step = min(u, remaining)
        x, y, h = _advance(x, y, h, kind, step, r_min)
        remaining -= step
        if remaining <= 0.0:
            break
    return x, y, mod2pi(h)


def dubins_shortest_path(start: Pose, end: Pose, r_min: float, m: int = 5) -> PrimitivePath:
    if r_min <= 0:
        raise ValueError("r_min must be positive")
    if m < 1:
        raise ValueError("m must be >= 1")
    same_pos = math.hypot(end.x - start.x, end.y - start.y) < 1e-12
    if same_pos and abs(math.remainder(end.heading - start.heading, TWO_PI)) < 1e-12:
        raise ZeroLengthPathError("start and end poses coincide")
    best = None
    for word, segs in dubins_words(start, end, r_min).items():
        total = sum(segs)
        # strict comparison keeps the first word in enumeration order on ties
        if best is None or total < best[1]:
            best = (word, total, segs)
    word, total, segs = best
    length = total * r_min
    samples = np.array(
        [pose_along(start, word, segs, r_min, length * i / m) for i in range(1, m + 1)]
    )
    return PrimitivePath(
        start=start,
        end=end,
        length=length,
        sampling_points=samples,
        turning_radius=r_min,
        word=word,
        segments=tuple(segs),
    )


def endpoint_bearings(count: int, rear_delta: float | None = None):
    """Heading-relative bearings of the kept endpoints.

    Endpoints evenly divide the circle; those strictly within ``rear_delta``
    of straight behind are dropped (default ``pi / count``).
    """
    if count < 1:
        raise ValueError("count must be >= 1")
    if rear_delta is None:
        rear_delta = math.pi / count
    kept = []
    for k in range(count):
        b = TWO_PI * k / count
        if abs(math.remainder(b - math.pi, TWO_PI)) < rear_delta - 1e-12:
            continue
        kept.append(b)
    return kept


def primitive_paths(
    pose: Pose,
    count: int,
    radius: float,
    r_min: float | None = None,
    m: int = 5,
    rear_delta: float | None = None,
):
    """Dubins paths from ``pose`` to evenly spaced endpoints on a circle.

    Each endpoint is approached heading radially outward from ``pose``.
    """
    if radius <= 0:
        raise ValueError("radius must be positive")
    if r_min is None:
        r_min = radius / 5.0
    bearings = endpoint_bearings(count, rear_delta)
    if not bearings:
        raise EmptyActionSetError(f"all {count} endpoints fall in the rear cone")
    paths = []
    for b in bearings:
        h = pose.heading + b
        end = Pose(pose.x + radius * math.cos(h), pose.y + radius * math.sin(h), h)
        paths.append(dubins_shortest_path(pose, end, r_min, m))
    return paths


class PathLibrary:
    """Primitive paths precomputed once at the origin and rigidly moved.

    Dubins lengths are invariant under rigid motion, so transforming the
    template is equivalent to re-solving at every pose and much cheaper.
    """

    def __init__(self, count=11, radius=2.5, r_min=None, m=5, rear_delta=None):
        self.count = count
        self.radius = radius
        self.r_min = radius / 5.0 if r_min is None else r_min
        self.m = m
        self.rear_delta = rear_delta
        template = primitive_paths(Pose(0.0, 0.0, 0.0), count, radius, self.r_min, m, rear_delta)
        self.template = template
        self.local_samples = np.ascontiguousarray(np.stack([p.sampling_points for p in template]))  # (K, m, 3)
        self.local_ends = np.ascontiguousarray(np.array([p.end.as_array() for p in template]))  # (K, 3)
        self.lengths = np.array([p.length for p in template])

    def __len__(self):
        return len(self.template)

    def transformed(self, pose: Pose, bounds=None):
        """World-frame ``(samples, ends, mask)`` for all template paths at ``pose``.

        ``mask`` flags paths whose sampling points and end lie inside
        ``bounds = (x_min, x_max, y_min, y_max)`` (all True without bounds).
        """
        b = np.array([-np.inf, np.inf, -np.inf, np.inf] if bounds is None else bounds, dtype=float)
        return _accel.place_paths(pose.x, pose.y, pose.heading, self.local_samples, self.local_ends, b)

    def build(self, pose: Pose, samples, ends, k):
        tpl = self.template[k]
        e = ends[k]
        return PrimitivePath(
            start=pose,
            end=Pose._trusted(e[0], e[1], e[2]),
            length=tpl.length,
            sampling_points=samples[k],
            turning_radius=self.r_min,
            word=tpl.word,
            segments=tpl.segments,
        )

    def paths_at(self, pose: Pose, bounds=None):
        """Primitive paths at ``pose`` that stay inside ``bounds``."""
        samples, ends, mask = self.transformed(pose, bounds)
        return [self.build(pose, samples, ends, k) for k in np.flatnonzero(mask)]

    def has_continuation(self, x, y, heading, bounds=None):
        b = np.array([-np.inf, np.inf, -np.inf, np.inf] if bounds is None else bounds, dtype=float)
        return bool(_accel.place_paths(x, y, heading, self.local_samples, self.local_ends, b)[2].any())

    def safe_paths_at(self, pose: Pose, bounds=None):
        """Like :meth:`paths_at` but skips paths ending at a dead end.

        Falls back to all feasible paths when every one of them dead-ends.
        """
        paths = self.paths_at(pose, bounds)
        keep = [p for p in paths if self.has_continuation(p.end.x, p.end.y, p.end.heading, bounds)]
        return keep if keep else paths

    def random_path(self, pose: Pose, rng, bounds=None):
        """One uniformly drawn feasible path, or None at a dead end."""
        samples, ends, mask = self.transformed(pose, bounds)
        idx = np.flatnonzero(mask)
        if idx.size == 0:
            return None
        return self.build(pose, samples, ends, idx[int(rng.integers(idx.size))])
