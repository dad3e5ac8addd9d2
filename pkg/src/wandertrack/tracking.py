"""Per-tag report routing, windowing and filtering.

A TrackingSession consumes a time-ordered stream of raw reports and emits
one trajectory log record per tag per second.  Both execution modes are
built on it: offline batch processing feeds it a globally sorted stream,
the live ingest service feeds it the output of a watermark reorder buffer.
Because the session state only advances on report timestamps (never on
arrival order), both modes produce identical logs for the same data.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable

from . import ekf
from .pipeline import (
    PACKET_GAP_MS,
    WINDOW_MS,
    MeasurementFrame,
    PacketObservation,
    RawReport,
    assemble_frame,
    packet_mean,
    window_average,
    window_start_of,
)

#: Canonical total order for reports with equal timestamps; both execution
#: modes feed reports in this order, which pins the log byte for byte.
def report_sort_key(r: RawReport) -> tuple:
    return (r.timestamp_ms, r.tag_id, r.anchor_id, r.receiver_index, r.rssi)


@dataclass(frozen=True)
class TrajectoryLogRecord:
    """One per-second tracker output line."""

    tag_id: str
    t_ms: int
    x_m: float
    y_m: float
    vx_mps: float
    vy_mps: float
    p_trace: float
    n_anchors_used: int
    coast_flag: bool


@dataclass
class _TagState:
    # open packet groups, one per anchor: (first timestamp, reports so far)
    open_packets: dict[str, tuple[int, list[RawReport]]] = field(default_factory=dict)
    # packets routed into not-yet-closed windows, keyed by window start
    windows: dict[int, list[PacketObservation]] = field(default_factory=dict)
    estimate: ekf.StateEstimate | None = None
    last_window_ms: int | None = None


class TrackingSession:
    """Single-writer pipeline turning raw reports into trajectory records.

    Feed reports in nondecreasing timestamp order (ties broken by
    `report_sort_key`), then call `flush()` once the stream ends.  Records
    are collected in `records` and pushed to the optional subscriber
    callback as they are produced.
    """

    def __init__(
        self,
        config: ekf.TrackerConfig,
        on_record: Callable[[TrajectoryLogRecord], None] | None = None,
    ) -> None:
        self._config = config
        self._on_record = on_record
        self._tags: dict[str, _TagState] = {}
        self.records: list[TrajectoryLogRecord] = []
        self.unknown_anchor_count = 0

    def feed(self, report: RawReport) -> None:
        """Process one report; its timestamp drives window closing."""
        self._advance(report.timestamp_ms)
        if report.anchor_id not in self._config.anchor_by_id:
            self.unknown_anchor_count += 1
            return
        tag = self._tags.setdefault(report.tag_id, _TagState())
        group = tag.open_packets.get(report.anchor_id)
        if group is not None:
            first_ms, members = group
            same_packet = (
                report.timestamp_ms - first_ms < PACKET_GAP_MS
                and len(members) < 2
                and all(m.receiver_index != report.receiver_index for m in members)
            )
            if same_packet:
                members.append(report)
                return
            self._close_packet(report.tag_id, tag, report.anchor_id)
        tag.open_packets[report.anchor_id] = (report.timestamp_ms, [report])

    def flush(self) -> None:
        """Close every open packet and window; call once at end of stream."""
        for tag_id in sorted(self._tags):
            tag = self._tags[tag_id]
            for anchor_id in sorted(tag.open_packets):
                self._close_packet(tag_id, tag, anchor_id)
        closable = sorted(
            (w, tag_id) for tag_id, tag in self._tags.items() for w in tag.windows
        )
        for w, tag_id in closable:
            self._close_window(tag_id, w)

    # -- internal mechanics ------------------------------------------------

    def _advance(self, now_ms: int) -> None:
        # Packets first: a group is complete once the grouping gap has
        # passed, and its observation may belong to a window about to close.
        for tag_id in sorted(self._tags):
            tag = self._tags[tag_id]
            expired = sorted(
                a for a, (first_ms, _) in tag.open_packets.items()
                if now_ms - first_ms >= PACKET_GAP_MS
            )
            for anchor_id in expired:
                self._close_packet(tag_id, tag, anchor_id)
        # A window is complete once every packet that can still land in it
        # has expired, one grouping gap after the window end.
        closable = sorted(
            (w, tag_id)
            for tag_id, tag in self._tags.items()
            for w in tag.windows
            if now_ms - (w + WINDOW_MS) >= PACKET_GAP_MS
        )
        for w, tag_id in closable:
            self._close_window(tag_id, w)

    def _close_packet(self, tag_id: str, tag: _TagState, anchor_id: str) -> None:
        _, members = tag.open_packets.pop(anchor_id)
        obs = packet_mean(sorted(members, key=report_sort_key))
        tag.windows.setdefault(window_start_of(obs.timestamp_ms), []).append(obs)

    def _close_window(self, tag_id: str, window_ms: int) -> None:
        tag = self._tags[tag_id]
        packets = tag.windows.pop(window_ms)
        by_anchor: dict[str, list[PacketObservation]] = {}
        for p in sorted(packets, key=lambda p: (p.timestamp_ms, p.anchor_id, p.rssi)):
            by_anchor.setdefault(p.anchor_id, []).append(p)
        observations = [
            window_average(group, window_ms) for _, group in sorted(by_anchor.items())
        ]
        frame = assemble_frame(observations, tag_id, window_ms)

        # Coast through any empty seconds between the previous window and
        # this one so the log keeps its one-record-per-second cadence.
        if tag.estimate is not None and tag.last_window_ms is not None:
            gap = tag.last_window_ms + WINDOW_MS
            while gap < window_ms:
                tag.estimate = ekf.predict(tag.estimate, self._config.motion)
                self._emit(tag_id, tag.estimate, n_anchors=0, coast=True)
                gap += WINDOW_MS

        if tag.estimate is None:
            tag.estimate = ekf.init_from_frame(frame, self._config)
            self._emit(tag_id, tag.estimate, n_anchors=len(frame.observations), coast=False)
        else:
            pred = ekf.predict(tag.estimate, self._config.motion)
            try:
                tag.estimate = ekf.update(pred, frame, self._config)
                self._emit(tag_id, tag.estimate, n_anchors=len(frame.observations), coast=False)
            except (ekf.TooFewAnchorsError, ekf.SingularInnovationError):
                tag.estimate = pred
                self._emit(tag_id, tag.estimate, n_anchors=0, coast=True)
        tag.last_window_ms = window_ms

    def _emit(self, tag_id: str, est: ekf.StateEstimate, n_anchors: int, coast: bool) -> None:
        x, y = est.position
        vx, vy = est.velocity
        record = TrajectoryLogRecord(
            tag_id=tag_id,
            t_ms=est.timestamp_ms,
            x_m=x,
            y_m=y,
            vx_mps=vx,
            vy_mps=vy,
            p_trace=float(est.covariance.trace()),
            n_anchors_used=n_anchors,
            coast_flag=coast,
        )
        self.records.append(record)
        if self._on_record is not None:
            self._on_record(record)


def run_offline(reports: Iterable[RawReport], config: ekf.TrackerConfig) -> list[TrajectoryLogRecord]:
    """Batch-track a report collection; the reference semantics for live mode.

    Reports are sorted into the canonical order and pushed through a
    fresh session.  Deterministic: the same input always yields the same
    records.
    """
    session = TrackingSession(config)
    for report in sorted(reports, key=report_sort_key):
        session.feed(report)
    session.flush()
    return session.records
