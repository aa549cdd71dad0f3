"""Eight-direction repeated mark measurement and its cluster metric suite.

A mark on the floor is measured from several approach headings; each recovered
position is labeled by direction and the per-direction clusters are summarized
by mean position, max/mean distance from the mean, the minimal enclosing
circle, the approach-angle range, plus the mean pairwise distance between
cluster means. All distance metrics live in the tracker xy-plane.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from numpy.typing import NDArray

from ._kernels import enclosing_circle
from .errors import EmptyCluster, EmptyInput, OutOfBounds
from . import frames
from .geometry import RigidTransform, apply, as_point3, rotation_about_z
from .pipeline import ReferencingResult
from .camera import ImagePoint
from .simulate import (
    NoiseConfig,
    SimWorld,
    STREAM_EXPERIMENT,
    experiment_placement,
    rng_substream,
    simulate_mark_observation,
)

Array = NDArray[np.float64]

# canonical report row order and nominal approach yaws
DIRECTIONS = ("left", "right", "up", "down", "upleft", "upright", "downleft", "downright")
DIRECTION_YAW_DEG = {
    "up": 0.0,
    "upleft": 45.0,
    "left": 90.0,
    "downleft": 135.0,
    "down": 180.0,
    "downright": -135.0,
    "right": -90.0,
    "upright": -45.0,
}
DIRECTION_TOLERANCE_DEG = 10.0


def _wrap_deg(a: float) -> float:
    return float((a + 180.0) % 360.0 - 180.0)


def direction_for_yaw(yaw_deg: float) -> str:
    """Direction label whose nominal yaw is within +-10 degrees of the input."""
    for label, nominal in DIRECTION_YAW_DEG.items():
        if abs(_wrap_deg(yaw_deg - nominal)) <= DIRECTION_TOLERANCE_DEG:
            return label
    raise ValueError(f"yaw {yaw_deg:.2f} deg is not within 10 deg of any direction")


@dataclass(frozen=True)
class MarkMeasurement:
    """One recovered mark position with its approach direction."""

    direction: str
    yaw_deg: float
    position: Array
    trial: int

    def __post_init__(self) -> None:
        if self.direction not in DIRECTION_YAW_DEG:
            raise ValueError(f"unknown direction {self.direction!r}")
        nominal = DIRECTION_YAW_DEG[self.direction]
        if abs(_wrap_deg(self.yaw_deg - nominal)) > DIRECTION_TOLERANCE_DEG:
            raise ValueError(
                f"yaw {self.yaw_deg:.2f} deg inconsistent with direction {self.direction!r}"
            )
        p = as_point3(self.position)
        p.setflags(write=False)
        object.__setattr__(self, "position", p)


@dataclass(frozen=True)
class ExperimentPlan:
    """Mark position, approach yaw list, repeats, and footprint offsets."""

    mark_xy_mm: tuple[float, float]
    yaw_deg_list: tuple[float, ...] = tuple(DIRECTION_YAW_DEG[d] for d in DIRECTIONS)
    repeats: int = 5
    max_offset_mm: float = 12.0
    yaw_jitter_deg: float = 0.15

    def __post_init__(self) -> None:
        if self.repeats < 1:
            raise ValueError("repeats must be at least 1")
        if not self.yaw_deg_list:
            raise ValueError("yaw list must not be empty")
        for yaw in self.yaw_deg_list:
            direction_for_yaw(yaw)  # raises for unmapped yaw
        if self.max_offset_mm < 0.0 or self.yaw_jitter_deg < 0.0:
            raise ValueError("offsets and jitter must be non-negative")
        object.__setattr__(self, "mark_xy_mm", tuple(float(v) for v in self.mark_xy_mm))
        object.__setattr__(self, "yaw_deg_list", tuple(float(v) for v in self.yaw_deg_list))


def measure_mark(
    result: ReferencingResult, image_point: ImagePoint, h_abs_rob: RigidTransform
) -> Array:
    """Mark position in tracker coordinates from one image observation.

    Rectifies the image point into the scene plane (z = 0 by construction),
    lifts it into the robot frame through the calibrated chain, and transforms
    it with the measurement-time robot pose.

    Raises:
        OutOfBounds: image point outside the sensor.
    """
    if not result.scene.model.contains(image_point):
        raise OutOfBounds(
            f"measure_mark: image point ({image_point.row:.1f}, {image_point.col:.1f}) "
            f"outside the sensor"
        )
    xy = result.scene.map_image_point(image_point)
    p_scn = np.array([xy[0], xy[1], 0.0])
    p_rob = apply(result.h_rob_scn, p_scn)
    return apply(h_abs_rob, p_rob)


def run_experiment(
    world: SimWorld,
    noise: NoiseConfig,
    plan: ExperimentPlan,
    result: ReferencingResult,
    *,
    seed: int | None = None,
) -> list[MarkMeasurement]:
    """Repeated mark measurement over all planned approach directions.

    Each measurement drives the robot to a placement that keeps the mark in
    view with a random footprint offset, images the mark, and recovers its
    tracker-frame position through the supplied calibration. The
    measurement-time robot pose uses the noisy smr reading with a flat-floor
    attitude assumption (no pitch/roll sensing). Deterministic per seed, with
    independent substreams per repeat.

    Raises:
        MarkNotVisible: plan geometry pushes the mark out of view.
    """
    base_seed = world.seed if seed is None else seed
    mark_abs = np.array(
        [
            plan.mark_xy_mm[0],
            plan.mark_xy_mm[1],
            float(np.asarray(world.floor_surface_z(plan.mark_xy_mm[0], plan.mark_xy_mm[1]))),
        ]
    )
    measurements: list[MarkMeasurement] = []
    for trial in range(plan.repeats):
        rng = rng_substream(base_seed, STREAM_EXPERIMENT, trial)
        for yaw_deg in plan.yaw_deg_list:
            yaw_actual = yaw_deg + plan.yaw_jitter_deg * float(rng.standard_normal())
            theta = rng.uniform(0.0, 2.0 * math.pi)
            radius = plan.max_offset_mm * math.sqrt(rng.uniform())
            offset = (radius * math.cos(theta), radius * math.sin(theta))
            placement = experiment_placement(
                world, mark_abs, math.radians(yaw_actual), offset
            )
            ip, smr = simulate_mark_observation(
                world, noise, placement, mark_abs, rng=rng
            )
            h_abs_rob = RigidTransform(
                rotation_about_z(placement.yaw_rad),
                smr.position,
                source=frames.ROB,
                dest=frames.ABS,
            )
            measurements.append(
                MarkMeasurement(
                    direction=direction_for_yaw(yaw_deg),
                    yaw_deg=yaw_actual,
                    position=measure_mark(result, ip, h_abs_rob),
                    trial=trial,
                )
            )
    return measurements


# --- metrics -------------------------------------------------------------------


class Circle(NamedTuple):
    center: Array
    radius_mm: float


def min_enclosing_circle(points: Sequence[Sequence[float]] | Array) -> Circle:
    """Smallest circle containing all 2D points.

    Raises:
        EmptyInput: no points.
    """
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.size == 0:
        raise EmptyInput("min_enclosing_circle: no points")
    if pts.shape[1] != 2:
        raise ValueError(f"expected 2D points, got shape {pts.shape}")
    cx, cy, r = enclosing_circle(pts)
    return Circle(np.array([cx, cy]), r)


def fit_circle(points: Sequence[Sequence[float]] | Array) -> Circle:
    """Algebraic least-squares circle through 2D points (Kasa fit)."""
    pts = np.atleast_2d(np.asarray(points, dtype=np.float64))
    if pts.shape[0] < 3:
        raise EmptyInput("fit_circle: need at least 3 points")
    a = np.column_stack([2.0 * pts, np.ones(pts.shape[0])])
    b = np.sum(pts * pts, axis=1)
    sol, *_ = np.linalg.lstsq(a, b, rcond=None)
    center = sol[:2]
    radius = math.sqrt(max(0.0, sol[2] + float(center @ center)))
    return Circle(center, radius)


@dataclass(frozen=True)
class DirectionStats:
    """Cluster summary for one approach direction (xy-plane metrics, mm)."""

    direction: str
    count: int
    mean_x_mm: float
    mean_y_mm: float
    max_from_mean_mm: float
    mean_from_mean_mm: float
    radius_mm: float
    yaw_min_deg: float | None
    yaw_max_deg: float | None

    @property
    def diameter_mm(self) -> float:
        return 2.0 * self.radius_mm


@dataclass(frozen=True)
class ClusterReport:
    """Per-direction and overall repeatability metrics."""

    directions: tuple[DirectionStats, ...]
    overall: DirectionStats
    mean_intercluster_l2_mm: float


def _yaw_range(yaws_deg: Array) -> tuple[float, float]:
    # range around the circular mean, robust to the +-180 wrap
    mean = math.degrees(
        math.atan2(
            float(np.mean(np.sin(np.radians(yaws_deg)))),
            float(np.mean(np.cos(np.radians(yaws_deg)))),
        )
    )
    rel = np.array([_wrap_deg(y - mean) for y in yaws_deg])
    return float(mean + rel.min()), float(mean + rel.max())


def _stats(direction: str, xy: Array, yaws: Array | None) -> DirectionStats:
    mean = xy.mean(axis=0)
    dists = np.linalg.norm(xy - mean, axis=1)
    circle = min_enclosing_circle(xy)
    if yaws is None:
        yaw_min = yaw_max = None
    else:
        yaw_min, yaw_max = _yaw_range(yaws)
    return DirectionStats(
        direction=direction,
        count=xy.shape[0],
        mean_x_mm=float(mean[0]),
        mean_y_mm=float(mean[1]),
        max_from_mean_mm=float(dists.max()),
        mean_from_mean_mm=float(dists.mean()),
        radius_mm=circle.radius_mm,
        yaw_min_deg=yaw_min,
        yaw_max_deg=yaw_max,
    )


def cluster_metrics(measurements: Sequence[MarkMeasurement]) -> ClusterReport:
    """Per-direction and overall cluster report over labeled measurements.

    Metrics use xy only; the approach-angle range is the min/max yaw per
    cluster; the inter-cluster statistic is the mean L2 distance over all
    unordered pairs of cluster means.

    Raises:
        EmptyCluster: no measurements.
    """
    if not measurements:
        raise EmptyCluster("cluster_metrics: no measurements")
    order = [d for d in DIRECTIONS if any(m.direction == d for m in measurements)]
    stats = []
    means = []
    for direction in order:
        members = [m for m in measurements if m.direction == direction]
        xy = np.array([m.position[:2] for m in members])
        yaws = np.array([m.yaw_deg for m in members])
        s = _stats(direction, xy, yaws)
        stats.append(s)
        means.append([s.mean_x_mm, s.mean_y_mm])

    all_xy = np.array([m.position[:2] for m in measurements])
    all_yaws = np.array([m.yaw_deg for m in measurements])
    overall = _stats("all", all_xy, all_yaws)

    means_arr = np.array(means)
    if len(means) >= 2:
        pair_dists = [
            float(np.linalg.norm(means_arr[i] - means_arr[j]))
            for i in range(len(means))
            for j in range(i + 1, len(means))
        ]
        inter = float(np.mean(pair_dists))
    else:
        inter = 0.0
    return ClusterReport(
        directions=tuple(stats), overall=overall, mean_intercluster_l2_mm=inter
    )
