"""Simulation-based region of attraction of the fallback controller.

The sweep simulates the closed loop from every ``(d0, theta0, rp)`` grid
state on every random path and records whether the robot converged, its
maximum distance to the path and when it converged.

:func:`build_safe_set` reduces the records to a :class:`SafeSet` over
``(d0, theta0)`` cells:

1. A cell belongs to the region of attraction only if every record at
   that cell (all ``rp``, all paths) converged.
2. Cells whose worst maximum deviation reaches the safety bound are
   dropped.
3. Cells are removed until the retained region is convex on the lattice.
4. The shrunk set keeps retained cells whose worst deviation is within
   ``set_max_d - v_max * control_period`` and whose one-tick
   neighbourhood is retained, then is made convex again.
5. The dwell time is the worst convergence time over the shrunk set.
"""

from __future__ import annotations

import io
import json
import logging
import math
import warnings
from collections.abc import Iterator, Sequence
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path as FilePath
from typing import IO, Any, overload

import numpy as np
import pandas as pd
from numpy.typing import NDArray
from scipy.spatial import ConvexHull

from simplextrack.controllers import (
    Controller,
    ControllerInput,
    PurePursuitController,
    pure_pursuit_many,
)
from simplextrack.kinematics import Pose, rk4_step_many, step
from simplextrack.path import Path, generate_random_path, project, project_many
from simplextrack.schemas import (
    AxisRange,
    PurePursuitParams,
    RobotLimits,
    SafeSetSummary,
    SweepConfig,
)

logger = logging.getLogger(__name__)

SAFE_SET_MAGIC = "# simplextrack safe set"
SAFE_SET_VERSION = "1"
CELL_COLUMNS = ["i_d", "i_theta", "worst_max_d", "worst_t_conv"]
RECORD_COLUMNS = ["d0", "theta0", "rp", "path_id", "converged", "max_d", "t_conv"]
# Hull facets are unit-normal, so this is a distance in cells.
HULL_TOLERANCE = 1e-9

_HEADER_KEYS = (
    "version",
    "d_axis",
    "theta_axis",
    "safety_bound",
    "motion_bound",
    "theta_margin",
    "path_seed",
    "set_max_d",
    "shrunk_max_d",
    "dwell_time",
    "cells",
)


class SweepError(ValueError):
    """Raised for a non-finite sweep state or unreadable sweep results."""

    def __init__(self, message: str, cell: tuple[float, float, float, int] | None = None):
        super().__init__(message)
        self.cell = cell


class SafeSetError(ValueError):
    """Raised for empty, inconsistent or malformed safe sets."""


# ── records ──────────────────────────────────────────────────────────
@dataclass(frozen=True, slots=True)
class SweepRecord:
    """Outcome of one closed-loop simulation; ``t_conv`` is None unless converged."""

    d0: float
    theta0: float
    rp: float
    path_id: int
    converged: bool
    max_d: float
    t_conv: float | None


class SweepRecords(Sequence[SweepRecord]):
    """Column store of sweep records in ``path -> d0 -> theta0 -> rp`` order.

    ``t_conv`` is NaN for records that did not converge.
    """

    def __init__(
        self,
        config: SweepConfig,
        *,
        path_id: NDArray[np.intp],
        i_d: NDArray[np.intp],
        i_theta: NDArray[np.intp],
        i_rp: NDArray[np.intp],
        converged: NDArray[np.bool_],
        max_d: NDArray[np.float64],
        t_conv: NDArray[np.float64],
    ) -> None:
        self.config = config
        self.path_id = np.asarray(path_id, dtype=np.intp)
        self.i_d = np.asarray(i_d, dtype=np.intp)
        self.i_theta = np.asarray(i_theta, dtype=np.intp)
        self.i_rp = np.asarray(i_rp, dtype=np.intp)
        self.converged = np.asarray(converged, dtype=bool)
        self.max_d = np.asarray(max_d, dtype=float)
        self.t_conv = np.asarray(t_conv, dtype=float)
        self.d0 = config.d0_range.lo + self.i_d * config.d0_range.step
        self.theta0 = config.theta0_range.lo + self.i_theta * config.theta0_range.step
        self.rp = config.rp_range.lo + self.i_rp * config.rp_range.step

    def __len__(self) -> int:
        return len(self.path_id)

    @overload
    def __getitem__(self, index: int) -> SweepRecord: ...

    @overload
    def __getitem__(self, index: slice) -> list[SweepRecord]: ...

    def __getitem__(self, index: int | slice) -> SweepRecord | list[SweepRecord]:
        if isinstance(index, slice):
            return [self[k] for k in range(*index.indices(len(self)))]
        t_conv = float(self.t_conv[index])
        return SweepRecord(
            d0=float(self.d0[index]),
            theta0=float(self.theta0[index]),
            rp=float(self.rp[index]),
            path_id=int(self.path_id[index]),
            converged=bool(self.converged[index]),
            max_d=float(self.max_d[index]),
            t_conv=None if math.isnan(t_conv) else t_conv,
        )

    def __iter__(self) -> Iterator[SweepRecord]:
        return (self[k] for k in range(len(self)))

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SweepRecords):
            return NotImplemented
        return (
            self.config == other.config
            and np.array_equal(self.path_id, other.path_id)
            and np.array_equal(self.i_d, other.i_d)
            and np.array_equal(self.i_theta, other.i_theta)
            and np.array_equal(self.i_rp, other.i_rp)
            and np.array_equal(self.converged, other.converged)
            and np.array_equal(self.max_d, other.max_d)
            and np.array_equal(self.t_conv, other.t_conv, equal_nan=True)
        )

    __hash__ = None  # type: ignore[assignment]

    @property
    def n_converged(self) -> int:
        return int(np.count_nonzero(self.converged))

    @classmethod
    def concat(cls, config: SweepConfig, parts: Sequence[SweepRecords]) -> SweepRecords:
        def cat(name: str) -> NDArray[Any]:
            return np.concatenate([getattr(part, name) for part in parts])

        return cls(
            config,
            path_id=cat("path_id"),
            i_d=cat("i_d"),
            i_theta=cat("i_theta"),
            i_rp=cat("i_rp"),
            converged=cat("converged"),
            max_d=cat("max_d"),
            t_conv=cat("t_conv"),
        )

    def to_frame(self) -> pd.DataFrame:
        return pd.DataFrame(
            {
                "d0": self.d0,
                "theta0": self.theta0,
                "rp": self.rp,
                "path_id": self.path_id,
                "converged": self.converged,
                "max_d": self.max_d,
                "t_conv": self.t_conv,
            },
            columns=RECORD_COLUMNS,
        )

    def to_csv(self, file: str | FilePath | IO[str]) -> None:
        """Write the records; absent convergence times are empty fields."""
        self.to_frame().to_csv(file, index=False, float_format="%.17g")

    @classmethod
    def from_csv(cls, file: str | FilePath | IO[str], config: SweepConfig) -> SweepRecords:
        """Read records written by :meth:`to_csv` for the grid of *config*."""
        try:
            frame = pd.read_csv(file, float_precision="round_trip")
        except (pd.errors.EmptyDataError, pd.errors.ParserError) as exc:
            raise SweepError(f"unreadable records file: {exc}") from exc
        missing = [column for column in RECORD_COLUMNS if column not in frame.columns]
        if missing:
            raise SweepError(f"records file lacks columns {missing}")

        def indices(values: pd.Series, axis: AxisRange, name: str) -> NDArray[np.intp]:
            out = np.empty(len(values), dtype=np.intp)
            for k, value in enumerate(values.to_numpy(dtype=float)):
                index = axis.index_of(value)
                if index is None:
                    raise SweepError(f"{name}={value} is not on the configured grid")
                out[k] = index
            return out

        return cls(
            config,
            path_id=frame["path_id"].to_numpy(dtype=np.intp),
            i_d=indices(frame["d0"], config.d0_range, "d0"),
            i_theta=indices(frame["theta0"], config.theta0_range, "theta0"),
            i_rp=indices(frame["rp"], config.rp_range, "rp"),
            converged=frame["converged"].to_numpy(dtype=bool),
            max_d=frame["max_d"].to_numpy(dtype=float),
            t_conv=frame["t_conv"].to_numpy(dtype=float),
        )


# ── simulation ───────────────────────────────────────────────────────
def sweep_path(config: SweepConfig, path_id: int) -> Path:
    """Random path *path_id* of the family selected by ``config.path_seed``."""
    return generate_random_path(
        (config.path_seed, path_id),
        n_waypoints=config.n_waypoints,
        turn_limit=config.turn_limit,
        segment_length=config.segment_length,
    ).densified(config.densify_spacing)


def initial_pose(path: Path, d0: float, theta0: float, rp: float) -> Pose:
    """Pose ``rp`` along the first segment, ``d0`` to its left, heading offset ``theta0``."""
    ux, uy = path.segment_units[0]
    heading = float(path.segment_headings[0])
    x0, y0 = path.waypoints[0]
    return Pose(
        float(x0 + rp * ux - d0 * uy),
        float(y0 + rp * uy + d0 * ux),
        heading + theta0,
    )


@dataclass(frozen=True, slots=True)
class _Outcome:
    converged: NDArray[np.bool_]
    max_d: NDArray[np.float64]
    t_conv: NDArray[np.float64]


def _simulate_batch(
    path: Path,
    path_id: int,
    d0: NDArray[np.float64],
    theta0: NDArray[np.float64],
    rp: NDArray[np.float64],
    config: SweepConfig,
    params: PurePursuitParams,
    limits: RobotLimits,
) -> _Outcome:
    ux, uy = path.segment_units[0]
    x0, y0 = path.waypoints[0]
    x = x0 + rp * ux - d0 * uy
    y = y0 + rp * uy + d0 * ux
    theta = path.segment_headings[0] + theta0
    segment = np.zeros(len(d0), dtype=np.intp)

    n = len(d0)
    dt = config.step_size
    hold = config.hold_steps
    max_d = np.zeros(n)
    run_len = np.zeros(n, dtype=np.intp)
    converged = np.zeros(n, dtype=bool)
    t_conv = np.full(n, np.nan)
    runaway = np.zeros(n, dtype=bool)

    for k in range(config.n_steps + 1):
        finite = np.isfinite(x) & np.isfinite(y) & np.isfinite(theta)
        if not finite.all():
            bad = int(np.flatnonzero(~finite)[0])
            cell = (float(d0[bad]), float(theta0[bad]), float(rp[bad]), path_id)
            raise SweepError(f"non-finite state at t={k * dt:.2f} s in cell {cell}", cell)

        d, _, segment, arclength = project_many(path, x, y, theta, segment)
        abs_d = np.abs(d)
        live = ~runaway
        max_d = np.where(live, np.maximum(max_d, abs_d), max_d)
        runaway |= live & (abs_d > config.runaway_distance)

        run_len = np.where(abs_d <= config.conv_dist, run_len + 1, 0)
        newly = live & ~converged & (run_len >= hold + 1)
        t_conv = np.where(newly, (k - hold) * dt, t_conv)
        converged |= newly

        if k == config.n_steps:
            break
        v, omega = pure_pursuit_many(path, x, y, theta, segment, arclength, params, limits)
        v = np.where(runaway, 0.0, v)
        omega = np.where(runaway, 0.0, omega)
        x, y, theta = rk4_step_many(x, y, theta, v, omega, dt)

    converged &= ~runaway
    t_conv = np.where(converged, t_conv, np.nan)
    return _Outcome(converged=converged, max_d=max_d, t_conv=t_conv)


def _simulate_scalar(
    path: Path,
    path_id: int,
    d0: float,
    theta0: float,
    rp: float,
    config: SweepConfig,
    controller: Controller,
) -> tuple[bool, float, float]:
    pose = initial_pose(path, d0, theta0, rp)
    frame = project(path, pose.position, pose.theta, hint=rp)
    dt = config.step_size
    hold = config.hold_steps
    max_d = 0.0
    run_len = 0
    t_conv = math.nan
    for k in range(config.n_steps + 1):
        abs_d = abs(frame.d_signed)
        max_d = max(max_d, abs_d)
        if abs_d > config.runaway_distance:
            return False, max_d, math.nan
        run_len = run_len + 1 if abs_d <= config.conv_dist else 0
        if math.isnan(t_conv) and run_len >= hold + 1:
            t_conv = (k - hold) * dt
        if k == config.n_steps:
            break
        cmd = controller.compute(ControllerInput(pose, frame, path, k * dt))
        try:
            pose = step(pose, cmd, dt)
        except ValueError as exc:
            cell = (d0, theta0, rp, path_id)
            raise SweepError(f"non-finite state in cell {cell}: {exc}", cell) from exc
        frame = project(path, pose.position, pose.theta, hint=frame.arclength)
    return not math.isnan(t_conv), max_d, t_conv


def _grid(config: SweepConfig) -> tuple[NDArray[np.intp], NDArray[np.intp], NDArray[np.intp]]:
    i_d, i_theta, i_rp = np.meshgrid(
        np.arange(config.d0_range.count),
        np.arange(config.theta0_range.count),
        np.arange(config.rp_range.count),
        indexing="ij",
    )
    return i_d.ravel(), i_theta.ravel(), i_rp.ravel()


def _sweep_one_path(
    task: tuple[SweepConfig, int, Controller | None, RobotLimits],
) -> SweepRecords:
    config, path_id, controller, limits = task
    path = sweep_path(config, path_id)
    i_d, i_theta, i_rp = _grid(config)
    d0 = config.d0_range.lo + i_d * config.d0_range.step
    theta0 = config.theta0_range.lo + i_theta * config.theta0_range.step
    rp = config.rp_range.lo + i_rp * config.rp_range.step

    if controller is None or isinstance(controller, PurePursuitController):
        params = controller.params if controller is not None else PurePursuitParams()
        ctrl_limits = controller.limits if controller is not None else limits
        outcome = _simulate_batch(path, path_id, d0, theta0, rp, config, params, ctrl_limits)
        converged, max_d, t_conv = outcome.converged, outcome.max_d, outcome.t_conv
    else:
        results = [
            _simulate_scalar(path, path_id, float(a), float(b), float(c), config, controller)
            for a, b, c in zip(d0, theta0, rp, strict=True)
        ]
        converged = np.array([r[0] for r in results], dtype=bool)
        max_d = np.array([r[1] for r in results])
        t_conv = np.array([r[2] for r in results])

    logger.debug(
        "Path %d: %d/%d records converged", path_id, int(converged.sum()), len(converged)
    )
    return SweepRecords(
        config,
        path_id=np.full(len(i_d), path_id, dtype=np.intp),
        i_d=i_d,
        i_theta=i_theta,
        i_rp=i_rp,
        converged=converged,
        max_d=max_d,
        t_conv=t_conv,
    )


def run_sweep(
    config: SweepConfig,
    controller: Controller | None = None,
    limits: RobotLimits | None = None,
    workers: int = 1,
) -> SweepRecords:
    """Simulate every grid state on every random path.

    Parameters
    ----------
    config : SweepConfig
        Grid, horizon, convergence criterion and path family.
    controller : Controller, optional
        Controller under analysis. Pure pursuit (the default) runs as a
        vectorised batch per path; any other controller is simulated
        state by state.
    limits : RobotLimits, optional
        Robot limits for the default pure-pursuit controller.
    workers : int
        Process count. Paths are distributed with an order-preserving map,
        so the records do not depend on this value.

    Returns
    -------
    SweepRecords
        ``|d0| x |theta0| x |rp| x n_paths`` records.
    """
    limits = limits or RobotLimits()
    tasks = [(config, path_id, controller, limits) for path_id in range(config.n_paths)]
    logger.info(
        "Sweep: %d states x %d paths = %d simulations (%d workers)",
        config.n_states,
        config.n_paths,
        config.n_records,
        workers,
    )
    if workers <= 1:
        parts = [_sweep_one_path(task) for task in tasks]
    else:
        with ProcessPoolExecutor(max_workers=workers) as executor:
            parts = list(executor.map(_sweep_one_path, tasks))
    records = SweepRecords.concat(config, parts)
    logger.info("Sweep finished: %d/%d converged", records.n_converged, len(records))
    return records


def resimulate(
    config: SweepConfig,
    path_id: int,
    d0: float,
    theta0: float,
    rp: float,
    params: PurePursuitParams | None = None,
    limits: RobotLimits | None = None,
) -> SweepRecord:
    """Re-run a single pure-pursuit sweep case with the sweep kernel."""
    outcome = _simulate_batch(
        sweep_path(config, path_id),
        path_id,
        np.array([d0]),
        np.array([theta0]),
        np.array([rp]),
        config,
        params or PurePursuitParams(),
        limits or RobotLimits(),
    )
    t_conv = float(outcome.t_conv[0])
    return SweepRecord(
        d0=d0,
        theta0=theta0,
        rp=rp,
        path_id=path_id,
        converged=bool(outcome.converged[0]),
        max_d=float(outcome.max_d[0]),
        t_conv=None if math.isnan(t_conv) else t_conv,
    )


def sweep_summary(records: SweepRecords) -> dict[str, Any]:
    """Counts and the ``(d0, theta0)`` cells with a non-converging record."""
    failed = ~records.converged
    cells = sorted(
        {
            (round(float(d), 6), round(float(t), 6))
            for d, t in zip(records.d0[failed], records.theta0[failed], strict=True)
        }
    )
    n = len(records)
    return {
        "n_records": n,
        "n_converged": records.n_converged,
        "converged_fraction": records.n_converged / n if n else 0.0,
        "n_non_converging_cells": len(cells),
        "non_converging_cells": [list(cell) for cell in cells],
    }


# ── per-cell aggregation ─────────────────────────────────────────────
@dataclass(frozen=True, slots=True)
class CellStats:
    """Worst case over ``rp`` and paths for every ``(d0, theta0)`` cell.

    ``worst_t_conv`` is NaN where some record did not converge.
    """

    counts: NDArray[np.intp]
    all_converged: NDArray[np.bool_]
    worst_max_d: NDArray[np.float64]
    worst_t_conv: NDArray[np.float64]


def aggregate_cells(records: SweepRecords, rp: float | None = None) -> CellStats:
    """Reduce records to per-cell worst cases, optionally for one ``rp`` slice."""
    config = records.config
    shape = (config.d0_range.count, config.theta0_range.count)
    keep = np.ones(len(records), dtype=bool)
    if rp is not None:
        i_rp = config.rp_range.index_of(rp)
        if i_rp is None:
            raise SweepError(f"rp={rp} is not on the configured grid")
        keep = records.i_rp == i_rp

    cell = records.i_d[keep] * shape[1] + records.i_theta[keep]
    size = shape[0] * shape[1]
    counts = np.bincount(cell, minlength=size)
    failures = np.bincount(
        cell, weights=(~records.converged[keep]).astype(float), minlength=size
    )

    worst_max = np.full(size, -np.inf)
    np.maximum.at(worst_max, cell, records.max_d[keep])
    worst_t = np.full(size, -np.inf)
    np.maximum.at(worst_t, cell, np.where(records.converged[keep], records.t_conv[keep], -np.inf))

    all_converged = (failures == 0) & (counts > 0)
    worst_max = np.where(counts > 0, worst_max, np.nan)
    worst_t = np.where(all_converged, worst_t, np.nan)
    return CellStats(
        counts=counts.reshape(shape),
        all_converged=all_converged.reshape(shape),
        worst_max_d=worst_max.reshape(shape),
        worst_t_conv=worst_t.reshape(shape),
    )


# ── lattice convexity ────────────────────────────────────────────────
def _boundary(mask: NDArray[np.bool_]) -> NDArray[np.bool_]:
    padded = np.pad(mask, 1, constant_values=False)
    interior = (
        padded[:-2, 1:-1] & padded[2:, 1:-1] & padded[1:-1, :-2] & padded[1:-1, 2:]
    )
    return mask & ~interior


def _segment_lattice(points: NDArray[np.int64], shape: tuple[int, ...]) -> NDArray[np.bool_]:
    """Lattice points on the segment spanned by collinear *points*."""
    inside = np.zeros(shape, dtype=bool)
    order = np.lexsort((points[:, 1], points[:, 0]))
    p, q = points[order[0]], points[order[-1]]
    delta = q - p
    n = math.gcd(int(abs(delta[0])), int(abs(delta[1])))
    if n == 0:
        inside[tuple(p)] = True
        return inside
    k = np.arange(n + 1)[:, None]
    cells = p + k * (delta // n)
    inside[cells[:, 0], cells[:, 1]] = True
    return inside


def _hull_lattice(mask: NDArray[np.bool_]) -> NDArray[np.bool_]:
    """Lattice points inside the convex hull of the cells of *mask*."""
    if not mask.any():
        return np.zeros_like(mask)
    points = np.argwhere(_boundary(mask))
    if len(points) < 3 or np.linalg.matrix_rank(points - points[0]) < 2:
        return _segment_lattice(points, mask.shape)

    hull = ConvexHull(points.astype(float))
    lo = points.min(axis=0)
    hi = points.max(axis=0)
    grid_i, grid_j = np.mgrid[lo[0] : hi[0] + 1, lo[1] : hi[1] + 1]
    candidates = np.column_stack([grid_i.ravel(), grid_j.ravel()]).astype(float)
    offsets = candidates @ hull.equations[:, :2].T + hull.equations[:, 2]
    within = np.all(offsets <= HULL_TOLERANCE, axis=1)

    inside = np.zeros_like(mask)
    cells = candidates[within].astype(np.intp)
    inside[cells[:, 0], cells[:, 1]] = True
    return inside


def hull_holes(mask: NDArray[np.bool_]) -> int:
    """Number of lattice points in the convex hull of *mask* that are not in it."""
    return int(np.count_nonzero(_hull_lattice(mask) & ~mask))


def is_convex(mask: NDArray[np.bool_]) -> bool:
    """Lattice convexity: every lattice point of the hull is a member."""
    return hull_holes(mask) == 0


def enforce_convexity(
    mask: NDArray[np.bool_], worst_max_d: NDArray[np.float64]
) -> NDArray[np.bool_]:
    """Greedily remove border cells until *mask* is lattice-convex.

    Each round removes the border cell whose removal leaves the fewest
    hull holes; ties go to the larger worst deviation, then the lower
    ``(i_d, i_theta)``.
    """
    out = mask.copy()
    holes = hull_holes(out)
    removed = 0
    while holes > 0:
        best_key: tuple[int, float, int, int] | None = None
        for i, j in np.argwhere(_boundary(out)):
            out[i, j] = False
            key = (hull_holes(out), -float(worst_max_d[i, j]), int(i), int(j))
            out[i, j] = True
            if best_key is None or key < best_key:
                best_key = key
        assert best_key is not None
        holes, _, i_best, j_best = best_key
        out[i_best, j_best] = False
        removed += 1
    if removed:
        logger.debug("Convexity: removed %d cells", removed)
    return out


# ── safe set ─────────────────────────────────────────────────────────
@dataclass(frozen=True, eq=False)
class SafeSet:
    """Convex safe region over ``(d0, theta0)`` cells and its shrunk variant.

    ``in_roa`` marks the retained cells (converged everywhere, below the
    safety bound, convex). ``shrunk`` marks the cells used for switching.
    Per-cell worst values are NaN outside ``in_roa``.
    """

    d_axis: AxisRange
    theta_axis: AxisRange
    in_roa: NDArray[np.bool_]
    worst_max_d: NDArray[np.float64]
    worst_t_conv: NDArray[np.float64]
    shrunk: NDArray[np.bool_]
    set_max_d: float
    shrunk_max_d: float
    dwell_time: float
    safety_bound: float
    motion_bound: float
    theta_margin: float
    path_seed: int

    def _cell(self, d: float, theta: float) -> tuple[int, int] | None:
        i = self.d_axis.index_of(d)
        j = self.theta_axis.index_of(theta)
        if i is None or j is None:
            return None
        return i, j

    def contains(self, d: float, theta: float, shrunk: bool = True) -> bool:
        """Membership of the cell nearest to ``(d, theta)``; False outside the grid."""
        cell = self._cell(d, theta)
        if cell is None:
            return False
        return bool((self.shrunk if shrunk else self.in_roa)[cell])

    @property
    def n_cells(self) -> int:
        return int(np.count_nonzero(self.in_roa))

    @property
    def n_shrunk_cells(self) -> int:
        return int(np.count_nonzero(self.shrunk))

    def summary(self) -> SafeSetSummary:
        return SafeSetSummary(
            set_max_d=self.set_max_d,
            shrunk_max_d=self.shrunk_max_d,
            dwell_time=self.dwell_time,
            n_cells=self.n_cells,
            n_shrunk_cells=self.n_shrunk_cells,
        )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SafeSet):
            return NotImplemented
        return (
            self.d_axis == other.d_axis
            and self.theta_axis == other.theta_axis
            and np.array_equal(self.in_roa, other.in_roa)
            and np.array_equal(self.shrunk, other.shrunk)
            and np.array_equal(self.worst_max_d, other.worst_max_d, equal_nan=True)
            and np.array_equal(self.worst_t_conv, other.worst_t_conv, equal_nan=True)
            and self.set_max_d == other.set_max_d
            and self.shrunk_max_d == other.shrunk_max_d
            and self.dwell_time == other.dwell_time
            and self.safety_bound == other.safety_bound
            and self.motion_bound == other.motion_bound
            and self.theta_margin == other.theta_margin
            and self.path_seed == other.path_seed
        )

    __hash__ = None  # type: ignore[assignment]


def membership(safe_set: SafeSet, d: float, theta: float) -> bool:
    """True iff ``(d, theta)`` lies in a cell of the shrunk set."""
    return safe_set.contains(d, theta, shrunk=True)


def _shift_all(mask: NDArray[np.bool_], reach_i: int, reach_j: int) -> NDArray[np.bool_]:
    """Cells whose whole ``(2 reach_i + 1) x (2 reach_j + 1)`` box lies in *mask*."""
    padded = np.pad(mask, ((reach_i, reach_i), (reach_j, reach_j)), constant_values=False)
    n_i, n_j = mask.shape
    out = np.ones_like(mask)
    for a in range(2 * reach_i + 1):
        for b in range(2 * reach_j + 1):
            out &= padded[a : a + n_i, b : b + n_j]
    return out


def _derive(
    d_axis: AxisRange,
    theta_axis: AxisRange,
    retained: NDArray[np.bool_],
    worst_max_d: NDArray[np.float64],
    worst_t_conv: NDArray[np.float64],
    *,
    safety_bound: float,
    motion_bound: float,
    theta_margin: float,
    path_seed: int,
) -> SafeSet:
    if not retained.any():
        raise SafeSetError("safe set is empty: no cell converges within the safety bound")
    worst_max = np.where(retained, worst_max_d, np.nan)
    worst_t = np.where(retained, worst_t_conv, np.nan)
    set_max_d = float(np.max(worst_max[retained]))
    shrunk_max_d = set_max_d - motion_bound

    reach_d = math.ceil(motion_bound / d_axis.step - 1e-9)
    reach_theta = math.ceil(theta_margin / theta_axis.step - 1e-9)
    candidate = retained & (np.where(retained, worst_max, np.inf) <= shrunk_max_d)
    candidate &= _shift_all(retained, reach_d, reach_theta)
    shrunk = enforce_convexity(candidate, np.where(retained, worst_max, 0.0))
    if not shrunk.any():
        raise SafeSetError(
            f"shrunk safe set is empty (set_max_d={set_max_d:.3f} m, "
            f"{int(retained.sum())} retained cells)"
        )
    dwell_time = float(np.max(worst_t[shrunk]))
    return SafeSet(
        d_axis=d_axis,
        theta_axis=theta_axis,
        in_roa=retained,
        worst_max_d=worst_max,
        worst_t_conv=worst_t,
        shrunk=shrunk,
        set_max_d=set_max_d,
        shrunk_max_d=shrunk_max_d,
        dwell_time=dwell_time,
        safety_bound=safety_bound,
        motion_bound=motion_bound,
        theta_margin=theta_margin,
        path_seed=path_seed,
    )


def build_safe_set(
    records: SweepRecords,
    safety_bound: float = 1.0,
    limits: RobotLimits | None = None,
    heading_margin: float = 0.1,
) -> SafeSet:
    """Reduce sweep records to the convex safe set and its shrunk variant.

    Parameters
    ----------
    records : SweepRecords
        Records covering the whole sweep grid.
    safety_bound : float
        Corridor half-width; cells whose worst deviation reaches it are
        dropped, so ``set_max_d < safety_bound``.
    limits : RobotLimits, optional
        ``v_max * control_period`` is the one-tick motion bound and
        ``omega_max * control_period`` the one-tick rotation bound.
    heading_margin : float
        Extra heading erosion of the shrunk set for the tangent change
        between consecutive path segments.

    Raises
    ------
    SafeSetError
        If a grid cell has no record or the resulting set is empty.
    """
    limits = limits or RobotLimits()
    config = records.config
    stats = aggregate_cells(records)
    if np.any(stats.counts == 0):
        raise SafeSetError(
            f"records do not cover the sweep grid ({int(np.sum(stats.counts == 0))} empty cells)"
        )
    expected = config.rp_range.count * config.n_paths
    if np.any(stats.counts != expected):
        warnings.warn(
            f"uneven coverage: expected {expected} records per cell", stacklevel=2
        )

    safe = stats.all_converged & (stats.worst_max_d < safety_bound)
    retained = enforce_convexity(safe, np.nan_to_num(stats.worst_max_d))
    safe_set = _derive(
        config.d0_range,
        config.theta0_range,
        retained,
        stats.worst_max_d,
        stats.worst_t_conv,
        safety_bound=safety_bound,
        motion_bound=limits.motion_bound,
        theta_margin=limits.rotation_bound + heading_margin,
        path_seed=config.path_seed,
    )
    logger.info(
        "Safe set: %d cells (%d shrunk), set_max_d=%.3f m, shrunk_max_d=%.3f m, dwell=%.2f s",
        safe_set.n_cells,
        safe_set.n_shrunk_cells,
        safe_set.set_max_d,
        safe_set.shrunk_max_d,
        safe_set.dwell_time,
    )
    if safe_set.n_shrunk_cells < 5:
        logger.warning("Shrunk safe set has only %d cells", safe_set.n_shrunk_cells)
    return safe_set


# ── safe set files ───────────────────────────────────────────────────
def _axis_text(axis: AxisRange) -> str:
    return f"{axis.lo!r},{axis.hi!r},{axis.step!r}"


def _parse_axis(text: str) -> AxisRange:
    lo, hi, step_ = (float(part) for part in text.split(","))
    return AxisRange(lo=lo, hi=hi, step=step_)


def save_safe_set(safe_set: SafeSet, file: str | FilePath) -> None:
    """Write the versioned text format: ``key=value`` header, then one row per cell."""
    cells = np.argwhere(safe_set.in_roa)
    frame = pd.DataFrame(
        {
            "i_d": cells[:, 0],
            "i_theta": cells[:, 1],
            "worst_max_d": safe_set.worst_max_d[safe_set.in_roa],
            "worst_t_conv": safe_set.worst_t_conv[safe_set.in_roa],
        },
        columns=CELL_COLUMNS,
    )
    header = [
        SAFE_SET_MAGIC,
        f"version={SAFE_SET_VERSION}",
        f"d_axis={_axis_text(safe_set.d_axis)}",
        f"theta_axis={_axis_text(safe_set.theta_axis)}",
        f"safety_bound={safe_set.safety_bound!r}",
        f"motion_bound={safe_set.motion_bound!r}",
        f"theta_margin={safe_set.theta_margin!r}",
        f"path_seed={safe_set.path_seed}",
        f"set_max_d={safe_set.set_max_d!r}",
        f"shrunk_max_d={safe_set.shrunk_max_d!r}",
        f"dwell_time={safe_set.dwell_time!r}",
        f"cells={len(frame)}",
    ]
    with open(file, "w", newline="") as handle:
        handle.write("\n".join(header) + "\n")
        frame.to_csv(handle, index=False, float_format="%.17g", lineterminator="\n")
    logger.info("Saved safe set (%d cells) to %s", len(frame), file)


def load_safe_set(file: str | FilePath) -> SafeSet:
    """Read a safe-set file and re-validate every invariant.

    Raises
    ------
    SafeSetError
        On a version mismatch, truncation, out-of-range or duplicate
        cells, a non-convex region, or header values that disagree with
        the values recomputed from the cells.
    """
    try:
        lines = FilePath(file).read_text().splitlines()
    except OSError as exc:
        raise SafeSetError(f"cannot read safe set {file}: {exc}") from exc
    if not lines or lines[0].strip() != SAFE_SET_MAGIC:
        raise SafeSetError(f"{file} is not a simplextrack safe-set file")

    header: dict[str, str] = {}
    body_start = None
    for n, line in enumerate(lines[1:], start=1):
        if line.startswith(CELL_COLUMNS[0] + ","):
            body_start = n
            break
        key, sep, value = line.partition("=")
        if not sep:
            raise SafeSetError(f"malformed header line {n + 1}: {line!r}")
        header[key.strip()] = value.strip()

    if header.get("version") != SAFE_SET_VERSION:
        raise SafeSetError(
            f"unsupported safe-set version {header.get('version')!r} "
            f"(expected {SAFE_SET_VERSION})"
        )
    missing = [key for key in _HEADER_KEYS if key not in header]
    if missing or body_start is None:
        raise SafeSetError(f"truncated safe-set file: missing {missing or 'cell table'}")

    try:
        d_axis = _parse_axis(header["d_axis"])
        theta_axis = _parse_axis(header["theta_axis"])
        safety_bound = float(header["safety_bound"])
        motion_bound = float(header["motion_bound"])
        theta_margin = float(header["theta_margin"])
        path_seed = int(header["path_seed"])
        n_cells = int(header["cells"])
        stored = {key: float(header[key]) for key in ("set_max_d", "shrunk_max_d", "dwell_time")}
        frame = pd.read_csv(
            io.StringIO("\n".join(lines[body_start:])), float_precision="round_trip"
        )
    except (ValueError, pd.errors.ParserError) as exc:
        raise SafeSetError(f"malformed safe-set file: {exc}") from exc

    if list(frame.columns) != CELL_COLUMNS:
        raise SafeSetError(f"cell table columns must be {CELL_COLUMNS}")
    if len(frame) != n_cells:
        raise SafeSetError(f"truncated safe-set file: {len(frame)} of {n_cells} cells")
    if frame.isna().to_numpy().any():
        raise SafeSetError("cell table holds empty values")

    i_d = frame["i_d"].to_numpy(dtype=np.intp)
    i_theta = frame["i_theta"].to_numpy(dtype=np.intp)
    shape = (d_axis.count, theta_axis.count)
    if np.any((i_d < 0) | (i_d >= shape[0]) | (i_theta < 0) | (i_theta >= shape[1])):
        raise SafeSetError("cell index outside the grid")
    if len(np.unique(i_d * shape[1] + i_theta)) != len(frame):
        raise SafeSetError("duplicate cells in safe-set file")
    worst = frame["worst_max_d"].to_numpy(dtype=float)
    if np.any(worst < 0) or np.any(worst >= safety_bound):
        raise SafeSetError("cell deviation outside [0, safety_bound)")

    retained = np.zeros(shape, dtype=bool)
    retained[i_d, i_theta] = True
    if not is_convex(retained):
        raise SafeSetError("retained region is not convex")
    worst_max = np.full(shape, np.nan)
    worst_max[i_d, i_theta] = worst
    worst_t = np.full(shape, np.nan)
    worst_t[i_d, i_theta] = frame["worst_t_conv"].to_numpy(dtype=float)

    safe_set = _derive(
        d_axis,
        theta_axis,
        retained,
        worst_max,
        worst_t,
        safety_bound=safety_bound,
        motion_bound=motion_bound,
        theta_margin=theta_margin,
        path_seed=path_seed,
    )
    for key, value in stored.items():
        if getattr(safe_set, key) != value:
            raise SafeSetError(
                f"header {key}={value!r} disagrees with the cells ({getattr(safe_set, key)!r})"
            )
    return safe_set


# ── reference artifact ───────────────────────────────────────────────
DATA_DIR = FilePath(__file__).resolve().parent / "data"
REFERENCE_SWEEP_FILE = DATA_DIR / "reference_sweep_config.json"
REFERENCE_SAFE_SET_FILE = DATA_DIR / "reference_safe_set.csv"
REFERENCE_SUMMARY_FILE = DATA_DIR / "reference_sweep_summary.json"


def reference_sweep_config() -> SweepConfig:
    """Sweep settings the shipped reference safe set was built from."""
    return SweepConfig.model_validate_json(REFERENCE_SWEEP_FILE.read_text())


def load_reference_safe_set() -> SafeSet:
    """The shipped safe set of the default sweep.

    Raises
    ------
    SafeSetError
        If the file is missing (``simplextrack build-reference`` writes it)
        or fails validation.
    """
    if not REFERENCE_SAFE_SET_FILE.exists():
        raise SafeSetError(
            f"no reference safe set at {REFERENCE_SAFE_SET_FILE}; "
            "run `simplextrack build-reference`"
        )
    safe_set = load_safe_set(REFERENCE_SAFE_SET_FILE)
    if safe_set.path_seed != reference_sweep_config().path_seed:
        raise SafeSetError("reference safe set does not match its sweep config")
    return safe_set


def load_reference_summary() -> dict[str, Any]:
    """Sweep summary of the reference sweep (counts and non-converging cells)."""
    if not REFERENCE_SUMMARY_FILE.exists():
        raise SweepError(
            f"no reference sweep summary at {REFERENCE_SUMMARY_FILE}; "
            "run `simplextrack build-reference`"
        )
    return json.loads(REFERENCE_SUMMARY_FILE.read_text())


# ── contour export ───────────────────────────────────────────────────
def contour_frame(
    records: SweepRecords, safe_set: SafeSet | None = None, rp: float | None = None
) -> pd.DataFrame:
    """Long-format grid of worst deviation and convergence time per ``(d0, theta0)``.

    With *rp* the worst case is taken over paths only, for that ``rp``.
    """
    config = records.config
    stats = aggregate_cells(records, rp=rp)
    i_d, i_theta = np.meshgrid(
        np.arange(config.d0_range.count), np.arange(config.theta0_range.count), indexing="ij"
    )
    i_d, i_theta = i_d.ravel(), i_theta.ravel()
    in_safe = np.zeros(len(i_d), dtype=bool)
    in_shrunk = np.zeros(len(i_d), dtype=bool)
    if safe_set is not None:
        in_safe = safe_set.in_roa[i_d, i_theta]
        in_shrunk = safe_set.shrunk[i_d, i_theta]
    return pd.DataFrame(
        {
            "d0": config.d0_range.lo + i_d * config.d0_range.step,
            "theta0": config.theta0_range.lo + i_theta * config.theta0_range.step,
            "worst_max_d": stats.worst_max_d[i_d, i_theta],
            "worst_t_conv": stats.worst_t_conv[i_d, i_theta],
            "all_converged": stats.all_converged[i_d, i_theta],
            "in_safe_set": in_safe,
            "in_shrunk_set": in_shrunk,
        }
    )


__all__ = [
    "CellStats",
    "SafeSet",
    "SafeSetError",
    "SweepError",
    "SweepRecord",
    "SweepRecords",
    "aggregate_cells",
    "build_safe_set",
    "contour_frame",
    "enforce_convexity",
    "hull_holes",
    "initial_pose",
    "is_convex",
    "load_reference_safe_set",
    "load_reference_summary",
    "load_safe_set",
    "membership",
    "reference_sweep_config",
    "resimulate",
    "run_sweep",
    "save_safe_set",
    "sweep_path",
    "sweep_summary",
]
