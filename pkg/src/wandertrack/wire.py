"""Line protocol spoken between anchors and the controller.

One report per line, UTF-8, newline terminated.  A line is a flat record
of space-separated key=value tokens:

    v=1 a=<anchor id> r=<receiver 0|1> g=<tag id> s=<rssi dBm> t=<unix ms>

Key order on the wire is fixed as above when writing; readers accept any
order and ignore unknown keys, so the format can grow without breaking old
parsers.  The same lines serve as replay files and as the live stream.
"""

from __future__ import annotations

from .pipeline import RawReport, rssi_in_range

WIRE_VERSION = 1
MAX_LINE_BYTES = 1024

_REQUIRED_KEYS = ("v", "a", "r", "g", "s", "t")


class WireFormatError(ValueError):
    """A line could not be turned into a report."""


class MalformedLineError(WireFormatError):
    """Syntactically broken line (not parseable as key=value tokens)."""


class InvalidReportError(WireFormatError):
    """Well-formed line whose values violate report invariants."""


class UnsupportedVersionError(WireFormatError):
    """Line written by a protocol version this reader does not speak."""


def format_report(report: RawReport) -> str:
    """Encode a report as one wire line (without the trailing newline)."""
    for ident in (report.anchor_id, report.tag_id):
        if not ident or any(c.isspace() for c in ident) or "=" in ident:
            raise ValueError(f"identifier {ident!r} not representable on the wire")
    return (
        f"v={WIRE_VERSION} a={report.anchor_id} r={report.receiver_index} "
        f"g={report.tag_id} s={report.rssi:.1f} t={report.timestamp_ms}"
    )


def parse_report(line: str) -> RawReport:
    """Decode one wire line into a raw report, validating every field."""
    if len(line.encode("utf-8", errors="replace")) > MAX_LINE_BYTES:
        raise MalformedLineError("line exceeds 1024 bytes")
    fields: dict[str, str] = {}
    tokens = line.split()
    if not tokens:
        raise MalformedLineError("empty line")
    for token in tokens:
        key, sep, value = token.partition("=")
        if not sep or not key or not value:
            raise MalformedLineError(f"token {token!r} is not key=value")
        if key not in fields:  # first occurrence wins, duplicates ignored
            fields[key] = value
    missing = [k for k in _REQUIRED_KEYS if k not in fields]
    if missing:
        raise MalformedLineError(f"missing field(s): {', '.join(missing)}")

    try:
        version = int(fields["v"])
    except ValueError:
        raise MalformedLineError(f"version {fields['v']!r} is not an integer") from None
    if version != WIRE_VERSION:
        raise UnsupportedVersionError(f"wire version {version} not supported")

    try:
        receiver = int(fields["r"])
        rssi = float(fields["s"])
        timestamp = int(fields["t"])
    except ValueError as exc:
        raise MalformedLineError(f"numeric field unreadable: {exc}") from None

    if receiver not in (0, 1):
        raise InvalidReportError(f"receiver index {receiver} outside {{0, 1}}")
    if not rssi_in_range(rssi):
        raise InvalidReportError(f"rssi {rssi} dBm outside plausible receiver range")
    return RawReport(
        anchor_id=fields["a"],
        receiver_index=receiver,
        tag_id=fields["g"],
        rssi=rssi,
        timestamp_ms=timestamp,
    )
