"""Synthetic radio deployment: scripted tags, anchors, raw report streams.

The simulator walks scripted tags through an area, evaluates the
log-distance path loss model at every anchor for every advertisement and
emits the same per-receiver raw reports a live deployment would produce,
plus a 1 Hz ground truth track.  All randomness comes from fixed-algorithm
generators keyed on (seed, tag, anchor, receiver), so a scenario replays
byte-identically on any platform.
"""

from __future__ import annotations

import hashlib
import math
from bisect import bisect_right
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .ekf import AnchorConfig, pathloss_rss
from .pipeline import RawReport, rssi_in_range


class InvalidScenarioError(ValueError):
    """Scenario description violates its invariants."""


@dataclass(frozen=True)
class TrajectoryScript:
    """Piecewise-linear ground truth path: waypoints (t_s, x_m, y_m).

    Between waypoints the tag moves along a straight line at constant
    speed; before the first and after the last waypoint it holds position.
    """

    tag_id: str
    waypoints: tuple[tuple[float, float, float], ...]

    def __post_init__(self) -> None:
        if not self.waypoints:
            raise InvalidScenarioError(f"script for {self.tag_id!r} has no waypoints")
        times = [w[0] for w in self.waypoints]
        if any(t1 <= t0 for t0, t1 in zip(times, times[1:])):
            raise InvalidScenarioError(f"waypoint times for {self.tag_id!r} must strictly increase")


@dataclass(frozen=True)
class NoiseModel:
    """Per-receiver measurement corruption.

    sigma_db is the Gaussian noise standard deviation per receiver,
    anchor_bias_db an optional constant offset per anchor (a crude stand-in
    for multipath), drop_probability the chance a receiver misses a packet.
    """

    sigma_db: float = 0.0
    anchor_bias_db: Mapping[str, float] = field(default_factory=dict)
    drop_probability: float = 0.0

    def __post_init__(self) -> None:
        if self.sigma_db < 0.0:
            raise InvalidScenarioError("sigma_db must be >= 0")
        if not 0.0 <= self.drop_probability < 1.0:
            raise InvalidScenarioError("drop_probability must be in [0, 1)")


@dataclass(frozen=True)
class GroundTruthSample:
    tag_id: str
    t_s: float
    x_m: float
    y_m: float


@dataclass(frozen=True)
class Scenario:
    """World description for one simulation run."""

    name: str
    area: tuple[float, float]
    anchors: tuple[AnchorConfig, ...]
    tags: tuple[TrajectoryScript, ...]
    noise: NoiseModel = NoiseModel()
    advertise_hz: float = 10.0
    duration_s: float = 60.0
    seed: int = 0
    t0_ms: int = 0
    d_min: float = 0.1
    #: Optional reception cutoff; by default every anchor hears every
    #: non-dropped packet (corridor-scale deployments are small).
    max_range_m: float | None = None

    def __post_init__(self) -> None:
        if self.advertise_hz <= 0.0:
            raise InvalidScenarioError("advertise_hz must be positive")
        if self.max_range_m is not None and self.max_range_m <= 0.0:
            raise InvalidScenarioError("max_range_m must be positive when set")
        if self.duration_s <= 0.0:
            raise InvalidScenarioError("duration_s must be positive")
        if not 0 <= self.seed < 2**64:
            raise InvalidScenarioError("seed must fit in 64 unsigned bits")
        ids = [a.anchor_id for a in self.anchors]
        if len(set(ids)) != len(ids):
            raise InvalidScenarioError("anchor ids must be unique")
        tag_ids = [t.tag_id for t in self.tags]
        if len(set(tag_ids)) != len(tag_ids):
            raise InvalidScenarioError("tag ids must be unique")
        w, h = self.area
        if w <= 0 or h <= 0:
            raise InvalidScenarioError("area must have positive width and height")
        for script in self.tags:
            for t, x, y in script.waypoints:
                if not (0.0 <= x <= w and 0.0 <= y <= h):
                    raise InvalidScenarioError(
                        f"waypoint ({x}, {y}) of {script.tag_id!r} outside {w} x {h} area"
                    )


def position_at(script: TrajectoryScript, t_s: float) -> tuple[float, float]:
    """Scripted position at time t, clamped to the endpoints outside the span."""
    wps = script.waypoints
    if t_s <= wps[0][0]:
        return (wps[0][1], wps[0][2])
    if t_s >= wps[-1][0]:
        return (wps[-1][1], wps[-1][2])
    times = [w[0] for w in wps]
    i = bisect_right(times, t_s)
    t0, x0, y0 = wps[i - 1]
    t1, x1, y1 = wps[i]
    f = (t_s - t0) / (t1 - t0)
    return (x0 + f * (x1 - x0), y0 + f * (y1 - y0))


def make_pacing_script(
    tag_id: str,
    center: tuple[float, float],
    path_length_m: float,
    speed_mps: float,
    duration_s: float,
) -> TrajectoryScript:
    """Back-and-forth pacing along a horizontal segment.

    The segment of the given length is centered at `center`; the tag
    traverses it end to end at constant speed for the whole duration, so
    the scripted distance is speed * duration.
    """
    if path_length_m <= 0.0 or speed_mps <= 0.0:
        raise InvalidScenarioError("path length and speed must be positive")
    cx, cy = center
    ends = (cx - path_length_m / 2.0, cx + path_length_m / 2.0)
    leg_s = path_length_m / speed_mps

    waypoints = [(0.0, ends[0], cy)]
    t = 0.0
    heading = 1  # index of the endpoint we are walking towards
    while t < duration_s:
        t_next = t + leg_s
        if t_next <= duration_s:
            waypoints.append((t_next, ends[heading], cy))
        else:
            # partial final leg, stop mid-segment at duration_s
            frac = (duration_s - t) / leg_s
            x_from = ends[1 - heading]
            x_to = ends[heading]
            waypoints.append((duration_s, x_from + frac * (x_to - x_from), cy))
        t = t_next
        heading = 1 - heading
    return TrajectoryScript(tag_id=tag_id, waypoints=tuple(waypoints))


def _digest(text: str) -> int:
    """Stable 64-bit digest of an identifier, platform independent."""
    return int.from_bytes(hashlib.sha256(text.encode("utf-8")).digest()[:8], "little")


def _stream_rng(scenario: Scenario, tag_id: str, anchor_id: str, receiver: int) -> np.random.Generator:
    seq = np.random.SeedSequence([scenario.seed, _digest(tag_id), _digest(anchor_id), receiver])
    return np.random.Generator(np.random.PCG64(seq))


def emit(scenario: Scenario) -> tuple[list[RawReport], list[GroundTruthSample]]:
    """Run a scenario and return its raw report stream and ground truth.

    Each tag advertises at times k / advertise_hz.  For every advertisement
    and every anchor, each of the two receivers independently drops the
    packet with drop_probability or reports the model RSS plus that
    anchor's bias plus Gaussian noise.  Readings outside the plausible
    receiver range are below sensitivity (or saturated) and are not
    reported.  Reports are returned in time order; ground truth is sampled
    at 1 Hz, aligned with the tracker's output cadence.
    """
    n_ads = math.floor(scenario.duration_s * scenario.advertise_hz + 1e-9)
    noise = scenario.noise

    # Precompute per-(tag, anchor, receiver) noise and drop streams so the
    # k-th advertisement always consumes the k-th draw of its own stream.
    streams: dict[tuple[str, str, int], tuple[np.ndarray, np.ndarray]] = {}
    for script in scenario.tags:
        for anchor in scenario.anchors:
            for receiver in (0, 1):
                rng = _stream_rng(scenario, script.tag_id, anchor.anchor_id, receiver)
                drops = rng.random(n_ads)
                noises = rng.normal(0.0, noise.sigma_db, n_ads)
                streams[(script.tag_id, anchor.anchor_id, receiver)] = (drops, noises)

    reports: list[RawReport] = []
    for k in range(n_ads):
        t_s = k / scenario.advertise_hz
        timestamp_ms = scenario.t0_ms + round(k * 1000.0 / scenario.advertise_hz)
        for script in scenario.tags:
            pos = position_at(script, t_s)
            for anchor in scenario.anchors:
                if scenario.max_range_m is not None:
                    if math.dist(pos, anchor.position) > scenario.max_range_m:
                        continue
                base = pathloss_rss(anchor, pos, scenario.d_min)
                base += noise.anchor_bias_db.get(anchor.anchor_id, 0.0)
                for receiver in (0, 1):
                    drops, noises = streams[(script.tag_id, anchor.anchor_id, receiver)]
                    if drops[k] < noise.drop_probability:
                        continue
                    rssi = base + noises[k]
                    if not rssi_in_range(rssi):
                        continue
                    reports.append(
                        RawReport(
                            anchor_id=anchor.anchor_id,
                            receiver_index=receiver,
                            tag_id=script.tag_id,
                            rssi=float(rssi),
                            timestamp_ms=timestamp_ms,
                        )
                    )

    truth = [
        GroundTruthSample(script.tag_id, float(s), *position_at(script, float(s)))
        for script in scenario.tags
        for s in range(math.floor(scenario.duration_s + 1e-9))
    ]
    return reports, truth
