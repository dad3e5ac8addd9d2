"""Live ingest: TCP report intake, watermark reordering, replay client.

Anchors connect over TCP and stream newline-delimited wire lines.  Lines
from all connections land in a shared reorder buffer: a report is released
to the tracking session once the watermark (max observed timestamp minus
the configured lag) passes it, which makes the released order independent
of how the connections interleave.  Reports arriving behind the watermark
are dropped and counted.  Parse errors are counted per server and never
kill a connection.
"""

from __future__ import annotations

import heapq
import logging
import socket
import socketserver
import threading
import time
from pathlib import Path
from typing import IO

from .config import DeploymentConfig
from .export import trajectory_header, trajectory_row
from .pipeline import RawReport
from .tracking import TrackingSession, TrajectoryLogRecord, report_sort_key
from .wire import WireFormatError, parse_report

logger = logging.getLogger(__name__)


class BindFailureError(OSError):
    """The ingest service could not bind its listen address."""


class ReorderBuffer:
    """Bounded-lateness reordering: release once the watermark passes.

    Not thread safe; the owner serializes access.
    """

    def __init__(self, watermark_ms: int) -> None:
        self.watermark_ms = watermark_ms
        self.late_count = 0
        self._heap: list[tuple[tuple, RawReport]] = []
        self._frontier_ms: int | None = None  # release line, nothing below may enter
        self._max_seen_ms: int | None = None

    def push(self, report: RawReport) -> list[RawReport]:
        """Add a report; return whatever the new watermark releases, in order."""
        if self._frontier_ms is not None and report.timestamp_ms < self._frontier_ms:
            self.late_count += 1
            return []
        heapq.heappush(self._heap, (report_sort_key(report), report))
        if self._max_seen_ms is None or report.timestamp_ms > self._max_seen_ms:
            self._max_seen_ms = report.timestamp_ms
        frontier = self._max_seen_ms - self.watermark_ms
        if self._frontier_ms is None or frontier > self._frontier_ms:
            self._frontier_ms = frontier
        released = []
        while self._heap and self._heap[0][1].timestamp_ms <= self._frontier_ms:
            released.append(heapq.heappop(self._heap)[1])
        return released

    def flush(self) -> list[RawReport]:
        """Release everything still buffered, in order."""
        released = []
        while self._heap:
            released.append(heapq.heappop(self._heap)[1])
        return released


class _LineHandler(socketserver.StreamRequestHandler):
    def handle(self) -> None:
        server: IngestServer = self.server.owner  # type: ignore[attr-defined]
        server._connection_opened()
        try:
            for raw_line in self.rfile:
                line = raw_line.decode("utf-8", errors="replace").strip()
                if not line:
                    continue
                server._ingest_line(line)
        finally:
            server._connection_closed()


class _TCPServer(socketserver.ThreadingTCPServer):
    allow_reuse_address = True
    daemon_threads = True


class IngestServer:
    """Live tracking session behind a TCP listener.

    Estimates append to the trajectory log file (when a path is given) as
    they are produced and are visible through `records`; subscribers
    registered with `subscribe` are called for each record.  `stop()`
    flushes the reorder buffer and the session, so a quiesced server has
    processed everything it accepted.
    """

    def __init__(
        self,
        config: DeploymentConfig,
        log_path: str | Path | None = None,
        host: str | None = None,
        port: int | None = None,
    ) -> None:
        self._config = config
        self._lock = threading.Lock()
        self._subscribers: list = []
        self._session = TrackingSession(config.tracker, on_record=self._dispatch)
        self._buffer = ReorderBuffer(config.ingest.reorder_watermark_ms)
        self.parse_error_count = 0
        self.lines_seen = 0
        self._open_connections = 0
        self._idle = threading.Condition(self._lock)
        self._log_stream: IO[str] | None = None
        if log_path is not None:
            self._log_stream = open(log_path, "w", encoding="utf-8")
            self._log_stream.write(trajectory_header() + "\n")
            self._log_stream.flush()

        bind_host = host if host is not None else config.ingest.listen_host
        bind_port = port if port is not None else config.ingest.listen_port
        try:
            self._server = _TCPServer((bind_host, bind_port), _LineHandler)
        except OSError as exc:
            raise BindFailureError(f"cannot bind {bind_host}:{bind_port}: {exc}") from exc
        self._server.owner = self
        self._thread = threading.Thread(target=self._server.serve_forever, daemon=True)

    @property
    def address(self) -> tuple[str, int]:
        return self._server.server_address[:2]

    @property
    def records(self) -> list[TrajectoryLogRecord]:
        with self._lock:
            return list(self._session.records)

    @property
    def late_count(self) -> int:
        with self._lock:
            return self._buffer.late_count

    def subscribe(self, callback) -> None:
        with self._lock:
            self._subscribers.append(callback)

    def start(self) -> "IngestServer":
        self._thread.start()
        logger.info("ingest listening on %s:%s", *self.address)
        return self

    @property
    def running(self) -> bool:
        return self._thread.is_alive()

    def join(self, timeout: float | None = None) -> None:
        """Block while the server runs (until another thread stops it)."""
        self._thread.join(timeout)

    def wait_idle(self, timeout: float = 10.0) -> bool:
        """Block until no anchor connection is open (drained input)."""
        deadline = time.monotonic() + timeout
        with self._idle:
            while self._open_connections > 0:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._idle.wait(remaining)
        return True

    def wait_for_lines(self, count: int, timeout: float = 10.0) -> bool:
        """Block until at least `count` lines have been received."""
        deadline = time.monotonic() + timeout
        with self._idle:
            while self.lines_seen < count:
                remaining = deadline - time.monotonic()
                if remaining <= 0:
                    return False
                self._idle.wait(remaining)
        return True

    def stop(self) -> None:
        """Stop accepting, flush buffered reports, close the log."""
        self._server.shutdown()
        self._server.server_close()
        if self._thread.is_alive():
            self._thread.join(timeout=5.0)
        with self._lock:
            for report in self._buffer.flush():
                self._session.feed(report)
            self._session.flush()
            if self._log_stream is not None:
                self._log_stream.close()
                self._log_stream = None

    # -- called from handler threads ----------------------------------------

    def _connection_opened(self) -> None:
        with self._lock:
            self._open_connections += 1

    def _connection_closed(self) -> None:
        with self._idle:
            self._open_connections -= 1
            self._idle.notify_all()

    def _ingest_line(self, line: str) -> None:
        report = None
        try:
            report = parse_report(line)
        except WireFormatError as exc:
            logger.debug("dropped unparseable line: %s", exc)
        with self._idle:
            self.lines_seen += 1
            if report is None:
                self.parse_error_count += 1
            else:
                for released in self._buffer.push(report):
                    self._session.feed(released)
            self._idle.notify_all()

    def _dispatch(self, record: TrajectoryLogRecord) -> None:
        # Called with the lock held (session mutations are serialized).
        if self._log_stream is not None:
            self._log_stream.write(trajectory_row(record) + "\n")
            self._log_stream.flush()
        for callback in self._subscribers:
            callback(record)


def serve_ingest(
    config: DeploymentConfig,
    log_path: str | Path | None = None,
    host: str | None = None,
    port: int | None = None,
) -> IngestServer:
    """Start a live tracking session; returns the running server."""
    return IngestServer(config, log_path=log_path, host=host, port=port).start()


def replay_file(
    path: str | Path, host: str, port: int, speed: float = 1.0, chunk_lines: int = 256
) -> int:
    """Stream a report file to an ingest service, pacing by timestamp.

    `speed` scales the timestamp gaps (10.0 replays ten times faster than
    recorded).  Returns the number of lines sent.
    """
    if speed <= 0:
        raise ValueError("speed must be positive")
    sent = 0
    with open(path, "r", encoding="utf-8") as stream, socket.create_connection((host, port)) as sock:
        first_ts: int | None = None
        start = time.monotonic()
        pending: list[bytes] = []
        for line in stream:
            line = line.strip()
            if not line:
                continue
            try:
                report = parse_report(line)
            except WireFormatError:
                continue  # replay what the live service would accept
            if first_ts is None:
                first_ts = report.timestamp_ms
            due = start + (report.timestamp_ms - first_ts) / 1000.0 / speed
            delay = due - time.monotonic()
            if delay > 0 or len(pending) >= chunk_lines:
                sock.sendall(b"".join(pending))
                pending.clear()
            if delay > 0:
                time.sleep(delay)
            pending.append(line.encode("utf-8") + b"\n")
            sent += 1
        sock.sendall(b"".join(pending))
    return sent
