"""Raw RSS report preprocessing: packet pooling and per-second averaging.

Every anchor carries two BLE receivers, so a single advertisement packet
can produce up to two raw reports.  Preprocessing runs in two stages:
first the receiver readings of one packet are pooled into a single value,
then all packet values landing in the same wall-clock second are averaged
per anchor.  The per-anchor averages of one second form the measurement
frame consumed by the tracker.

All averaging is done in the dBm (logarithmic) domain.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from statistics import fmean
from typing import Iterable, Sequence

WINDOW_MS = 1000
#: Readings closer together than this are treated as one advertisement packet.
#: Advertising runs at 10 Hz (100 ms spacing), so 50 ms separates packets
#: unambiguously.
PACKET_GAP_MS = 50

RSSI_MIN_DBM = -120.0
RSSI_MAX_DBM = 0.0


class PipelineError(ValueError):
    """Invalid input to a preprocessing step."""


class EmptyInputError(PipelineError):
    """A packet must contain at least one receiver reading."""


class MixedIdentityError(PipelineError):
    """Readings pooled into one packet must share anchor and tag."""


class EmptyWindowError(PipelineError):
    """A window with no packets produces no observation."""


class DuplicateAnchorError(PipelineError):
    """A measurement frame may contain at most one observation per anchor."""


@dataclass(frozen=True)
class RawReport:
    """One receiver's RSS reading of one advertisement packet."""

    anchor_id: str
    receiver_index: int
    tag_id: str
    rssi: float
    timestamp_ms: int

    def __post_init__(self) -> None:
        if self.receiver_index not in (0, 1):
            raise ValueError(f"receiver_index must be 0 or 1, got {self.receiver_index!r}")
        if not math.isfinite(self.rssi):
            raise ValueError("rssi must be finite")


@dataclass(frozen=True)
class PacketObservation:
    """RSS of one packet at one anchor, pooled over the receivers that heard it."""

    anchor_id: str
    tag_id: str
    rssi: float
    timestamp_ms: int
    receivers_used: int


@dataclass(frozen=True)
class AnchorObservation:
    """Per-second RSS average for one anchor, the RSS_n entry of a frame."""

    anchor_id: str
    mean_rssi: float
    sample_count: int
    window_start_ms: int
    window_end_ms: int

    def __post_init__(self) -> None:
        if self.window_end_ms - self.window_start_ms != WINDOW_MS:
            raise ValueError("observation window must span exactly one second")
        if self.sample_count < 1:
            raise ValueError("sample_count must be positive")


@dataclass(frozen=True)
class MeasurementFrame:
    """One tag's per-anchor averaged observations for a 1-second window.

    Observations are sorted ascending by anchor_id.  Anchors that heard
    nothing during the window are simply absent; whether the frame is
    usable is the tracker's call.
    """

    tag_id: str
    window_start_ms: int
    observations: tuple[AnchorObservation, ...]


def window_start_of(timestamp_ms: int) -> int:
    """Start of the wall-clock-aligned 1-second window containing a timestamp."""
    return (timestamp_ms // WINDOW_MS) * WINDOW_MS


def rssi_in_range(rssi: float) -> bool:
    """True when a reading is physically plausible for a BLE receiver."""
    return math.isfinite(rssi) and RSSI_MIN_DBM <= rssi <= RSSI_MAX_DBM


def packet_mean(reports: Sequence[RawReport]) -> PacketObservation:
    """Pool the receiver readings of one advertisement packet.

    The pooled rssi is the arithmetic mean in dBm, the timestamp the
    earliest report timestamp.  Single-receiver packets are accepted.
    """
    if not reports:
        raise EmptyInputError("packet has no reports")
    if len(reports) > 2:
        raise PipelineError(f"an anchor has two receivers, got {len(reports)} reports")
    first = reports[0]
    for r in reports[1:]:
        if r.anchor_id != first.anchor_id or r.tag_id != first.tag_id:
            raise MixedIdentityError(
                f"reports mix ({first.anchor_id},{first.tag_id}) with ({r.anchor_id},{r.tag_id})"
            )
    timestamps = [r.timestamp_ms for r in reports]
    if max(timestamps) - min(timestamps) >= PACKET_GAP_MS:
        raise PipelineError("reports too far apart in time to be one packet")
    return PacketObservation(
        anchor_id=first.anchor_id,
        tag_id=first.tag_id,
        rssi=fmean(r.rssi for r in reports),
        timestamp_ms=min(timestamps),
        receivers_used=len(reports),
    )


def window_average(packets: Sequence[PacketObservation], window_start_ms: int) -> AnchorObservation:
    """Average the packet observations of one anchor over one second."""
    if not packets:
        raise EmptyWindowError("window has no packets")
    first = packets[0]
    for p in packets[1:]:
        if p.anchor_id != first.anchor_id or p.tag_id != first.tag_id:
            raise MixedIdentityError("packets in one window average must share anchor and tag")
    for p in packets:
        if not window_start_ms <= p.timestamp_ms < window_start_ms + WINDOW_MS:
            raise PipelineError(
                f"packet at {p.timestamp_ms} outside window [{window_start_ms}, {window_start_ms + WINDOW_MS})"
            )
    return AnchorObservation(
        anchor_id=first.anchor_id,
        mean_rssi=fmean(p.rssi for p in packets),
        sample_count=len(packets),
        window_start_ms=window_start_ms,
        window_end_ms=window_start_ms + WINDOW_MS,
    )


def assemble_frame(
    observations: Iterable[AnchorObservation], tag_id: str, window_start_ms: int
) -> MeasurementFrame:
    """Build the measurement vector of one window, sorted by anchor_id.

    The frame is emitted even when few (or zero) anchors reported; the
    tracker decides whether it is usable.
    """
    obs = sorted(observations, key=lambda o: o.anchor_id)
    seen: set[str] = set()
    for o in obs:
        if o.anchor_id in seen:
            raise DuplicateAnchorError(f"anchor {o.anchor_id} appears twice in one frame")
        seen.add(o.anchor_id)
        if o.window_start_ms != window_start_ms:
            raise PipelineError("observations must share the frame window")
    return MeasurementFrame(tag_id=tag_id, window_start_ms=window_start_ms, observations=tuple(obs))
