"""Waypoint polyline geometry.

A :class:`Path` is an immutable polyline. :func:`project` maps a robot
position and heading to path-relative coordinates (:class:`PathFrame`),
:func:`lookahead_point` finds the pure-pursuit target, and the track
generators build the benchmark circuits and the random sweep paths.

Sign convention: ``d_signed`` is positive when the robot is to the left
of the direction of travel.
"""

from __future__ import annotations

import logging
import math
from collections.abc import Sequence
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import IO

import numpy as np
import pandas as pd
from numpy.typing import ArrayLike, NDArray

from simplextrack.kinematics import wrap_angle, wrap_angles
from simplextrack.schemas import CosineTrackParams, SquareTrackParams

logger = logging.getLogger(__name__)

MIN_SEGMENT_LENGTH = 1e-9

# Arclength window searched around a progress hint (m behind, m ahead).
HINT_BEHIND = 3.0
HINT_AHEAD = 6.0

# Segment-index windows of the batch kernels.
BATCH_BEHIND = 6
BATCH_AHEAD = 12
BATCH_LOOKAHEAD = 16

_ROOT_SLACK = 1e-12


class PathError(ValueError):
    """Raised for invalid waypoint data or malformed path files."""


def _frozen(array: NDArray[np.float64]) -> NDArray[np.float64]:
    array.setflags(write=False)
    return array


class Path:
    """Immutable waypoint polyline with precomputed segment geometry."""

    def __init__(self, waypoints: ArrayLike) -> None:
        points = np.array(waypoints, dtype=float)
        if points.ndim != 2 or points.shape[1] != 2:
            raise PathError(f"waypoints must be an (n, 2) array, got shape {points.shape}")
        if len(points) < 2:
            raise PathError(f"a path needs at least 2 waypoints, got {len(points)}")
        if not np.all(np.isfinite(points)):
            raise PathError("waypoints must be finite")

        vectors = np.diff(points, axis=0)
        lengths = np.hypot(vectors[:, 0], vectors[:, 1])
        short = np.flatnonzero(lengths <= MIN_SEGMENT_LENGTH)
        if short.size:
            raise PathError(
                f"consecutive waypoints {short[0]} and {short[0] + 1} coincide "
                f"(segment length {lengths[short[0]]:.3g} m)"
            )

        self._waypoints = _frozen(points)
        self._vectors = _frozen(vectors)
        self._lengths = _frozen(lengths)
        self._units = _frozen(vectors / lengths[:, None])
        self._headings = _frozen(np.arctan2(vectors[:, 1], vectors[:, 0]))
        self._cumulative = _frozen(np.concatenate(([0.0], np.cumsum(lengths))))

    # ── geometry accessors ──────────────────────────────────────────
    @property
    def waypoints(self) -> NDArray[np.float64]:
        return self._waypoints

    @property
    def cumulative_arclength(self) -> NDArray[np.float64]:
        return self._cumulative

    @property
    def segment_vectors(self) -> NDArray[np.float64]:
        return self._vectors

    @property
    def segment_lengths(self) -> NDArray[np.float64]:
        return self._lengths

    @property
    def segment_units(self) -> NDArray[np.float64]:
        return self._units

    @property
    def segment_headings(self) -> NDArray[np.float64]:
        return self._headings

    @property
    def n_segments(self) -> int:
        return len(self._lengths)

    @property
    def length(self) -> float:
        return float(self._cumulative[-1])

    @property
    def end(self) -> tuple[float, float]:
        return (float(self._waypoints[-1, 0]), float(self._waypoints[-1, 1]))

    def __len__(self) -> int:
        return len(self._waypoints)

    def __repr__(self) -> str:
        return f"Path(n_waypoints={len(self)}, length={self.length:.3f})"

    def segment_at(self, s: float) -> int:
        """Index of the segment containing arclength *s* (clamped to the path)."""
        idx = int(np.searchsorted(self._cumulative, s, side="right")) - 1
        return min(max(idx, 0), self.n_segments - 1)

    def point_at(self, s: float) -> tuple[float, float]:
        """Point at arclength *s*, clamped to ``[0, length]``."""
        s = min(max(s, 0.0), self.length)
        idx = self.segment_at(s)
        offset = s - self._cumulative[idx]
        x, y = self._waypoints[idx] + offset * self._units[idx]
        return (float(x), float(y))

    def heading_at(self, s: float) -> float:
        """Tangent heading of the segment containing arclength *s*."""
        return float(self._headings[self.segment_at(s)])

    def densified(self, spacing: float) -> Path:
        """Split every segment into equal pieces no longer than *spacing*."""
        if not math.isfinite(spacing) or spacing <= 0:
            raise PathError(f"spacing must be positive, got {spacing!r}")
        points: list[NDArray[np.float64]] = []
        for start, vector, length in zip(
            self._waypoints[:-1], self._vectors, self._lengths, strict=True
        ):
            pieces = max(1, math.ceil(length / spacing - 1e-9))
            fractions = np.arange(pieces, dtype=float) / pieces
            points.append(start + fractions[:, None] * vector)
        points.append(self._waypoints[-1:])
        return Path(np.vstack(points))

    # ── file exchange ───────────────────────────────────────────────
    def to_csv(self, file: str | FilePath | IO[str]) -> None:
        """Write one ``x,y`` pair per line, no header."""
        frame = pd.DataFrame(self._waypoints, columns=["x", "y"])
        frame.to_csv(file, header=False, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, file: str | FilePath | IO[str]) -> Path:
        """Load a headerless ``x,y`` CSV and validate it."""
        try:
            frame = pd.read_csv(file, header=None, float_precision="round_trip")
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
            raise PathError(f"unreadable path file: {exc}") from exc
        if frame.shape[1] != 2:
            raise PathError(f"path file must have 2 columns, found {frame.shape[1]}")
        try:
            values = frame.to_numpy(dtype=float)
        except ValueError as exc:
            raise PathError(f"path file holds non-numeric values: {exc}") from exc
        return cls(values)


@dataclass(frozen=True, slots=True)
class PathFrame:
    """Robot state relative to a path.

    ``foot`` is the closest point on the polyline and ``position`` the
    robot position the frame was computed for.
    """

    d_signed: float
    theta_rel: float
    segment_index: int
    arclength: float
    r_p: float
    position: tuple[float, float]
    foot: tuple[float, float]


def _candidate_segments(path: Path, hint: float | None) -> NDArray[np.intp]:
    if hint is None:
        return np.arange(path.n_segments)
    cum = path.cumulative_arclength
    lo, hi = hint - HINT_BEHIND, hint + HINT_AHEAD
    idx = np.flatnonzero((cum[1:] >= lo) & (cum[:-1] <= hi))
    return idx if idx.size else np.arange(path.n_segments)


def project(
    path: Path,
    position: Sequence[float] | NDArray[np.float64],
    heading: float = 0.0,
    *,
    hint: float | None = None,
) -> PathFrame:
    """Project a robot position onto *path*.

    Parameters
    ----------
    path : Path
        Reference polyline.
    position : sequence of float
        Robot position ``(x, y)`` in meters.
    heading : float
        Robot heading in radians, used for ``theta_rel``.
    hint : float, optional
        Previous arclength. Restricts the search to segments overlapping
        ``[hint - 3 m, hint + 6 m]``, which keeps projection monotone on
        self-overlapping circuits. Without a hint the search is global.

    Returns
    -------
    PathFrame
        Frame of the closest polyline point; exact-distance ties resolve
        to the later segment.
    """
    px, py = float(position[0]), float(position[1])
    if not (math.isfinite(px) and math.isfinite(py) and math.isfinite(heading)):
        raise PathError(f"cannot project non-finite state ({px}, {py}, {heading})")

    idx = _candidate_segments(path, hint)
    starts = path.waypoints[idx]
    ends = path.waypoints[idx + 1]
    vectors = path.segment_vectors[idx]
    lengths = path.segment_lengths[idx]

    t = ((px - starts[:, 0]) * vectors[:, 0] + (py - starts[:, 1]) * vectors[:, 1]) / lengths**2
    t = np.clip(t, 0.0, 1.0)
    feet = starts + t[:, None] * vectors
    feet = np.where((t >= 1.0)[:, None], ends, feet)
    dist2 = (px - feet[:, 0]) ** 2 + (py - feet[:, 1]) ** 2

    best = len(idx) - 1 - int(np.argmin(dist2[::-1]))
    seg = int(idx[best])
    fx, fy = float(feet[best, 0]), float(feet[best, 1])
    ux, uy = path.segment_units[seg]
    cross = ux * (py - fy) - uy * (px - fx)
    distance = math.hypot(px - fx, py - fy)
    r_p = float(t[best] * lengths[best])

    return PathFrame(
        d_signed=-distance if cross < 0 else distance,
        theta_rel=wrap_angle(heading - float(path.segment_headings[seg])),
        segment_index=seg,
        arclength=float(path.cumulative_arclength[seg]) + r_p,
        r_p=r_p,
        position=(px, py),
        foot=(fx, fy),
    )


def lookahead_point(path: Path, frame: PathFrame, lookahead: float) -> tuple[float, float]:
    """First point ahead on *path* at distance *lookahead* from the robot.

    Intersects the circle of radius *lookahead* around ``frame.position``
    with the segments from ``frame.segment_index`` onward and returns the
    intersection with the smallest arclength beyond ``frame.arclength``.
    Falls back to the final waypoint when no such intersection exists.
    """
    if not math.isfinite(lookahead) or lookahead <= 0:
        raise PathError(f"lookahead must be positive, got {lookahead!r}")
    px, py = frame.position
    idx = np.arange(frame.segment_index, path.n_segments)
    starts = path.waypoints[idx]
    vectors = path.segment_vectors[idx]
    lengths = path.segment_lengths[idx]

    fx = starts[:, 0] - px
    fy = starts[:, 1] - py
    a = lengths**2
    b = 2.0 * (fx * vectors[:, 0] + fy * vectors[:, 1])
    c = fx**2 + fy**2 - lookahead**2
    disc = b**2 - 4.0 * a * c

    best_s = math.inf
    best_point = path.end
    for k in np.flatnonzero(disc >= 0.0):
        root = math.sqrt(disc[k])
        for t in ((-b[k] - root) / (2.0 * a[k]), (-b[k] + root) / (2.0 * a[k])):
            if not -_ROOT_SLACK <= t <= 1.0 + _ROOT_SLACK:
                continue
            t = min(max(t, 0.0), 1.0)
            s = float(path.cumulative_arclength[idx[k]] + t * lengths[k])
            if frame.arclength < s < best_s:
                best_s = s
                best_point = (
                    float(starts[k, 0] + t * vectors[k, 0]),
                    float(starts[k, 1] + t * vectors[k, 1]),
                )
        if math.isfinite(best_s):
            break
    return best_point


# ── batch kernels (reachability sweep) ───────────────────────────────
def project_many(
    path: Path,
    x: NDArray[np.float64],
    y: NDArray[np.float64],
    heading: NDArray[np.float64],
    hint_segment: NDArray[np.intp],
) -> tuple[
    NDArray[np.float64], NDArray[np.float64], NDArray[np.intp], NDArray[np.float64]
]:
    """Vectorised :func:`project` over a window of segments per robot.

    Each robot searches ``BATCH_BEHIND`` segments before and
    ``BATCH_AHEAD`` after *hint_segment*.

    Returns ``(d_signed, theta_rel, segment_index, arclength)``.
    """
    offsets = np.arange(-BATCH_BEHIND, BATCH_AHEAD + 1)
    idx = np.clip(hint_segment[:, None] + offsets[None, :], 0, path.n_segments - 1)
    starts = path.waypoints[idx]
    ends = path.waypoints[idx + 1]
    vectors = path.segment_vectors[idx]
    lengths = path.segment_lengths[idx]

    rx = x[:, None] - starts[..., 0]
    ry = y[:, None] - starts[..., 1]
    t = np.clip((rx * vectors[..., 0] + ry * vectors[..., 1]) / lengths**2, 0.0, 1.0)
    feet_x = np.where(t >= 1.0, ends[..., 0], starts[..., 0] + t * vectors[..., 0])
    feet_y = np.where(t >= 1.0, ends[..., 1], starts[..., 1] + t * vectors[..., 1])
    dist2 = (x[:, None] - feet_x) ** 2 + (y[:, None] - feet_y) ** 2

    width = idx.shape[1]
    best = width - 1 - np.argmin(dist2[:, ::-1], axis=1)
    rows = np.arange(len(x))
    seg = idx[rows, best]
    fx, fy = feet_x[rows, best], feet_y[rows, best]
    ux, uy = path.segment_units[seg, 0], path.segment_units[seg, 1]
    cross = ux * (y - fy) - uy * (x - fx)
    distance = np.hypot(x - fx, y - fy)
    d_signed = np.where(cross < 0, -distance, distance)
    theta_rel = wrap_angles(heading - path.segment_headings[seg])
    arclength = path.cumulative_arclength[seg] + t[rows, best] * lengths[rows, best]
    return d_signed, theta_rel, seg, arclength


def lookahead_many(
    path: Path,
    x: NDArray[np.float64],
    y: NDArray[np.float64],
    segment: NDArray[np.intp],
    arclength: NDArray[np.float64],
    lookahead: float,
) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Vectorised :func:`lookahead_point` over ``BATCH_LOOKAHEAD`` segments ahead."""
    idx = np.minimum(segment[:, None] + np.arange(BATCH_LOOKAHEAD)[None, :], path.n_segments - 1)
    starts = path.waypoints[idx]
    vectors = path.segment_vectors[idx]
    lengths = path.segment_lengths[idx]

    fx = starts[..., 0] - x[:, None]
    fy = starts[..., 1] - y[:, None]
    a = lengths**2
    b = 2.0 * (fx * vectors[..., 0] + fy * vectors[..., 1])
    c = fx**2 + fy**2 - lookahead**2
    disc = b**2 - 4.0 * a * c
    root = np.sqrt(np.where(disc >= 0.0, disc, 0.0))

    best_s = np.full(len(x), np.inf)
    best_x = np.full(len(x), path.end[0])
    best_y = np.full(len(x), path.end[1])
    for sign in (-1.0, 1.0):
        t = (-b + sign * root) / (2.0 * a)
        ok = (disc >= 0.0) & (t >= -_ROOT_SLACK) & (t <= 1.0 + _ROOT_SLACK)
        t = np.clip(t, 0.0, 1.0)
        s = path.cumulative_arclength[idx] + t * lengths
        s = np.where(ok & (s > arclength[:, None]), s, np.inf)
        k = np.argmin(s, axis=1)
        rows = np.arange(len(x))
        s_min = s[rows, k]
        better = s_min < best_s
        best_s = np.where(better, s_min, best_s)
        best_x = np.where(better, starts[rows, k, 0] + t[rows, k] * vectors[rows, k, 0], best_x)
        best_y = np.where(better, starts[rows, k, 1] + t[rows, k] * vectors[rows, k, 1], best_y)
    return best_x, best_y


# ── generators ───────────────────────────────────────────────────────
def generate_random_path(
    seed: int | Sequence[int],
    n_waypoints: int = 50,
    turn_limit: float = 0.5,
    segment_length: float = 1.0,
) -> Path:
    """Seeded random polyline starting at the origin heading along +x.

    Every segment has length *segment_length*; consecutive segments turn by
    a uniform angle in ``[-turn_limit, turn_limit]``.
    """
    if n_waypoints < 2:
        raise PathError(f"n_waypoints must be at least 2, got {n_waypoints}")
    if turn_limit < 0 or segment_length <= 0:
        raise PathError("turn_limit must be >= 0 and segment_length > 0")
    rng = np.random.default_rng(seed)
    turns = rng.uniform(-turn_limit, turn_limit, size=n_waypoints - 2)
    headings = np.concatenate(([0.0], np.cumsum(turns)))
    steps = segment_length * np.column_stack((np.cos(headings), np.sin(headings)))
    points = np.vstack(([0.0, 0.0], np.cumsum(steps, axis=0)))
    return Path(points)


def square_track(params: SquareTrackParams | None = None) -> Path:
    """Clockwise rectangular circuit, repeated for ``params.laps`` laps.

    Corners are ``(0, 0) -> (W, 0) -> (W, -H) -> (0, -H) -> (0, 0)``; the
    default 10 m x 7.5 m rectangle driven twice is 70 m long.
    """
    params = params or SquareTrackParams()
    w, h = params.sideways, params.downwards
    lap = [(w, 0.0), (w, -h), (0.0, -h), (0.0, 0.0)]
    corners = [(0.0, 0.0)] + lap * params.laps
    return Path(corners).densified(params.spacing)


def cosine_track(params: CosineTrackParams | None = None) -> Path:
    """``y = A cos(2 pi x / wavelength)`` sampled every ``spacing`` along x."""
    params = params or CosineTrackParams()
    n = math.floor(params.span / params.spacing + 1e-9) + 1
    xs = np.arange(n, dtype=float) * params.spacing
    ys = params.amplitude * np.cos(math.tau * xs / params.wavelength)
    return Path(np.column_stack((xs, ys))).densified(params.spacing)


def straight_path(length: float = 10.0, spacing: float | None = None) -> Path:
    """Straight path from the origin along +x, optionally densified."""
    path = Path([(0.0, 0.0), (length, 0.0)])
    return path.densified(spacing) if spacing else path


def count_corners(path: Path, tolerance: float = 1e-6) -> int:
    """Number of interior waypoints where the tangent heading changes."""
    turns = wrap_angles(np.diff(path.segment_headings))
    return int(np.count_nonzero(np.abs(turns) > tolerance))


__all__ = [
    "Path",
    "PathError",
    "PathFrame",
    "cosine_track",
    "count_corners",
    "generate_random_path",
    "lookahead_many",
    "lookahead_point",
    "project",
    "project_many",
    "square_track",
    "straight_path",
]
