#!/usr/bin/env python3
"""Live ingest round trip: socket service vs offline batch.

Starts the TCP ingest service on an ephemeral port, replays a simulated
report file into it at 20x speed, and shows that the live trajectory log
is byte-identical to offline batch tracking of the same file.  Also
demonstrates the subscriber stream and the late-report counter.
"""

import io
import tempfile
from pathlib import Path

from wandertrack import (
    IngestServer,
    NoiseModel,
    Scenario,
    emit,
    load_deployment,
    make_pacing_script,
    replay_file,
    run_offline,
)
from wandertrack.export import write_trajectory_csv
from wandertrack.wire import format_report, parse_report

config = load_deployment("fig2-corridors")

# %% Simulate 30 s of pacing and write the wire-format report file
scenario = Scenario(
    name="live-demo",
    area=config.area,
    anchors=config.anchors,
    tags=(make_pacing_script("T1", (15.0, 1.0), 7.0, 2.0 / 3.0, 30.0),),
    noise=NoiseModel(sigma_db=3.0),
    duration_s=30.0,
    seed=5,
    d_min=config.tracker.d_min,
)
reports, _ = emit(scenario)

workdir = Path(tempfile.mkdtemp(prefix="wandertrack-demo-"))
report_path = workdir / "reports.txt"
report_path.write_text("".join(format_report(r) + "\n" for r in reports))
print(f"report file: {report_path} ({len(reports)} lines)")
print("a line looks like:", format_report(reports[0]))

# %% Offline reference
offline_records = run_offline(
    [parse_report(line) for line in report_path.read_text().splitlines()],
    config.tracker,
)
offline_csv = io.StringIO()
write_trajectory_csv(offline_records, offline_csv)

# %% Live service on an ephemeral port, with a subscriber watching records
live_log = workdir / "live.csv"
server = IngestServer(config, log_path=live_log, port=0).start()
server.subscribe(
    lambda r: print(f"  live record: t={r.t_ms / 1000:4.1f} s pos=({r.x_m:5.2f},{r.y_m:5.2f})")
    if r.t_ms % 10_000 == 0
    else None
)
host, port = server.address
print(f"\ningest service on {host}:{port}, replaying at 20x")
sent = replay_file(report_path, host, port, speed=20.0)
server.wait_for_lines(sent, timeout=30.0)
server.stop()

# %% Compare byte for byte
live_bytes = live_log.read_text()
print(f"\nreplayed {sent} reports, {server.late_count} late, "
      f"{server.parse_error_count} parse errors")
print(f"live log records: {len(server.records)}, offline records: {len(offline_records)}")
print("live log identical to offline log:", live_bytes == offline_csv.getvalue())
