"""Trajectory log persistence and export formats.

The trajectory log is a plain CSV, one row per tracker output record, in
a fixed column order.  It is append-only: rows are written as they are
produced, so a truncated file is still parseable up to the last complete
row.  GeoJSON export produces one feature per tag for map tooling, and
episode reports serialize wandering detections with ISO-8601 times.
"""

from __future__ import annotations

import csv
import json
from datetime import datetime, timezone
from typing import IO, Iterable

from .analytics import Trajectory, WanderEpisode
from .tracking import TrajectoryLogRecord

TRAJECTORY_FIELDS = (
    "tag_id",
    "t_ms",
    "x_m",
    "y_m",
    "vx_mps",
    "vy_mps",
    "p_trace",
    "n_anchors_used",
    "coast_flag",
)

EPISODE_FIELDS = ("tag_id", "start", "end", "distance_m", "extent_m", "mean_speed_mps")


def trajectory_header() -> str:
    return ",".join(TRAJECTORY_FIELDS)


def trajectory_row(record: TrajectoryLogRecord) -> str:
    """One CSV row; floats use repr so parsing the row back is lossless."""
    return ",".join(
        (
            record.tag_id,
            str(record.t_ms),
            repr(record.x_m),
            repr(record.y_m),
            repr(record.vx_mps),
            repr(record.vy_mps),
            repr(record.p_trace),
            str(record.n_anchors_used),
            str(int(record.coast_flag)),
        )
    )


def write_trajectory_csv(records: Iterable[TrajectoryLogRecord], stream: IO[str]) -> None:
    stream.write(trajectory_header() + "\n")
    for record in records:
        stream.write(trajectory_row(record) + "\n")


def read_trajectory_csv(stream: IO[str]) -> list[TrajectoryLogRecord]:
    reader = csv.DictReader(stream)
    records = []
    for row in reader:
        records.append(
            TrajectoryLogRecord(
                tag_id=row["tag_id"],
                t_ms=int(row["t_ms"]),
                x_m=float(row["x_m"]),
                y_m=float(row["y_m"]),
                vx_mps=float(row["vx_mps"]),
                vy_mps=float(row["vy_mps"]),
                p_trace=float(row["p_trace"]),
                n_anchors_used=int(row["n_anchors_used"]),
                coast_flag=bool(int(row["coast_flag"])),
            )
        )
    return records


def trajectories_from_records(records: Iterable[TrajectoryLogRecord]) -> dict[str, Trajectory]:
    """Group log records into one per-tag trajectory (time in seconds)."""
    points: dict[str, list[tuple[float, float, float]]] = {}
    for r in records:
        points.setdefault(r.tag_id, []).append((r.t_ms / 1000.0, r.x_m, r.y_m))
    return {
        tag_id: Trajectory(tag_id=tag_id, points=tuple(sorted(pts)))
        for tag_id, pts in points.items()
    }


def write_geojson(records: Iterable[TrajectoryLogRecord], stream: IO[str]) -> None:
    """One LineString feature per tag, point timestamps in the properties.

    Coordinates are the deployment's planar meters, not geographic; a tag
    with a single record degrades to a Point feature.
    """
    by_tag: dict[str, list[TrajectoryLogRecord]] = {}
    for r in records:
        by_tag.setdefault(r.tag_id, []).append(r)
    features = []
    for tag_id in sorted(by_tag):
        rows = sorted(by_tag[tag_id], key=lambda r: r.t_ms)
        coords = [[r.x_m, r.y_m] for r in rows]
        geometry = (
            {"type": "LineString", "coordinates": coords}
            if len(coords) > 1
            else {"type": "Point", "coordinates": coords[0]}
        )
        features.append(
            {
                "type": "Feature",
                "geometry": geometry,
                "properties": {"tag_id": tag_id, "t_ms": [r.t_ms for r in rows]},
            }
        )
    json.dump({"type": "FeatureCollection", "features": features}, stream, indent=2)
    stream.write("\n")


def _iso(t_s: float) -> str:
    return datetime.fromtimestamp(t_s, tz=timezone.utc).isoformat()


def write_episode_csv(episodes: Iterable[WanderEpisode], stream: IO[str]) -> None:
    """Episode report: one row per detected episode, ISO-8601 start/end."""
    writer = csv.writer(stream, lineterminator="\n")
    writer.writerow(EPISODE_FIELDS)
    for e in episodes:
        writer.writerow(
            (
                e.tag_id,
                _iso(e.start_t),
                _iso(e.end_t),
                f"{e.distance_m:.2f}",
                f"{e.extent_m:.2f}",
                f"{e.mean_speed_mps:.3f}",
            )
        )
