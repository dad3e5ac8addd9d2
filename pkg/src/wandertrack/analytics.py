"""Trajectory statistics and wandering episode detection.

Wandering shows up as a lot of walking inside a small area: path length
far exceeding the spatial footprint.  The detector slides a window over
the trajectory and flags windows whose covered distance is both large in
absolute terms and large relative to the bounding-box diagonal, then
merges overlapping flagged windows into episodes.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

logger = logging.getLogger(__name__)

#: Floor on the spatial extent when forming the distance/extent ratio, so a
#: stationary window cannot blow the ratio up.
EXTENT_FLOOR_M = 0.1


@dataclass(frozen=True)
class Trajectory:
    """Time-stamped planar track: points (t_s, x_m, y_m), nondecreasing t."""

    tag_id: str
    points: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        if not self.points:
            raise ValueError("trajectory needs at least one point")
        last_t = None
        for t, x, y in self.points:
            if not (math.isfinite(t) and math.isfinite(x) and math.isfinite(y)):
                raise ValueError("trajectory coordinates must be finite")
            if last_t is not None and t < last_t:
                raise ValueError("trajectory timestamps must be nondecreasing")
            last_t = t


@dataclass(frozen=True)
class PathStats:
    length_m: float
    duration_s: float
    extent_m: float
    loiter_ratio: float


@dataclass(frozen=True)
class WanderEpisode:
    """A sustained stretch of movement confined to a small area."""

    tag_id: str
    start_t: float
    end_t: float
    distance_m: float
    extent_m: float
    mean_speed_mps: float


@dataclass(frozen=True)
class DetectorParams:
    window_s: float = 120.0
    stride_s: float = 10.0
    min_distance_m: float = 40.0
    min_loiter_ratio: float = 4.0
    min_speed_mps: float = 0.2

    def __post_init__(self) -> None:
        if self.window_s <= 0 or self.stride_s <= 0:
            raise ValueError("window_s and stride_s must be positive")
        if self.min_distance_m < 0 or self.min_loiter_ratio < 0 or self.min_speed_mps < 0:
            raise ValueError("detector thresholds must be nonnegative")


def _arrays(traj: Trajectory) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    pts = np.asarray(traj.points, dtype=float)
    return pts[:, 0], pts[:, 1], pts[:, 2]


def path_length(traj: Trajectory) -> float:
    """Total walked distance: sum of consecutive point-to-point distances."""
    _, x, y = _arrays(traj)
    return float(np.hypot(np.diff(x), np.diff(y)).sum())


def spatial_extent(traj: Trajectory) -> float:
    """Diagonal of the axis-aligned bounding box of the trajectory."""
    _, x, y = _arrays(traj)
    return float(math.hypot(x.max() - x.min(), y.max() - y.min()))


def summarize(traj: Trajectory) -> PathStats:
    """Full-trajectory distance, duration, footprint and loiter ratio."""
    t, x, y = _arrays(traj)
    length = float(np.hypot(np.diff(x), np.diff(y)).sum())
    extent = float(math.hypot(x.max() - x.min(), y.max() - y.min()))
    return PathStats(
        length_m=length,
        duration_s=float(t[-1] - t[0]),
        extent_m=extent,
        loiter_ratio=length / max(extent, EXTENT_FLOOR_M),
    )


def _span_stats(
    t: np.ndarray, x: np.ndarray, y: np.ndarray, cumdist: np.ndarray, start: float, end: float
) -> tuple[float, float, float]:
    """(distance, extent, mean speed) over points with start <= t <= end."""
    i = int(np.searchsorted(t, start, side="left"))
    j = int(np.searchsorted(t, end, side="right"))
    if j - i < 2:
        return (0.0, 0.0, 0.0)
    dist = float(cumdist[j - 1] - cumdist[i])
    extent = float(math.hypot(x[i:j].max() - x[i:j].min(), y[i:j].max() - y[i:j].min()))
    span_s = float(t[j - 1] - t[i])
    speed = dist / span_s if span_s > 0 else 0.0
    return (dist, extent, speed)


def detect_episodes(traj: Trajectory, params: DetectorParams = DetectorParams()) -> list[WanderEpisode]:
    """Find wandering episodes in a trajectory.

    A sliding window of window_s seconds, advanced by stride_s, is
    wandering-positive when its covered distance reaches min_distance_m,
    the distance-to-extent ratio reaches min_loiter_ratio and the mean
    speed reaches min_speed_mps.  Overlapping or adjacent positive windows
    merge into one episode whose statistics are recomputed over the merged
    span.  A trajectory shorter than one window yields no episodes.
    """
    t, x, y = _arrays(traj)
    span = float(t[-1] - t[0])
    if span < params.window_s:
        logger.warning(
            "trajectory for %s spans %.1f s, shorter than the %.1f s detection window",
            traj.tag_id, span, params.window_s,
        )
        return []

    cumdist = np.concatenate([[0.0], np.cumsum(np.hypot(np.diff(x), np.diff(y)))])

    positives: list[tuple[float, float]] = []
    start = float(t[0])
    while start + params.window_s <= float(t[-1]) + 1e-9:
        end = start + params.window_s
        dist, extent, speed = _span_stats(t, x, y, cumdist, start, end)
        if (
            dist >= params.min_distance_m
            and dist / max(extent, EXTENT_FLOOR_M) >= params.min_loiter_ratio
            and speed >= params.min_speed_mps
        ):
            positives.append((start, end))
        start += params.stride_s

    merged: list[list[float]] = []
    for w_start, w_end in positives:
        if merged and w_start <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], w_end)
        else:
            merged.append([w_start, w_end])

    episodes = []
    for e_start, e_end in merged:
        dist, extent, speed = _span_stats(t, x, y, cumdist, e_start, e_end)
        episodes.append(
            WanderEpisode(
                tag_id=traj.tag_id,
                start_t=e_start,
                end_t=e_end,
                distance_m=dist,
                extent_m=extent,
                mean_speed_mps=speed,
            )
        )
    return episodes
