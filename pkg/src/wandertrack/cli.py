"""Command line around the simulate -> track -> analyze workflow.

Subcommands:
    simulate  scenario config -> raw report file (+ ground truth)
    track     raw report file -> trajectory log (offline batch)
    serve     live ingest on a TCP socket -> trajectory log
    analyze   trajectory log -> wandering episode report
    replay    raw report file -> socket, paced by timestamp
    export    trajectory log -> csv or geojson

Deployment configs are YAML files; bundled deployments (fig2-corridors)
resolve by name.
"""

from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

from . import export as export_mod
from .analytics import detect_episodes
from .config import ConfigError, load_deployment
from .ingest import IngestServer, replay_file
from .simulate import emit
from .tracking import run_offline
from .wire import WireFormatError, format_report, parse_report

logger = logging.getLogger(__name__)


def _read_reports(path: Path) -> list:
    reports = []
    with open(path, "r", encoding="utf-8") as stream:
        for lineno, line in enumerate(stream, start=1):
            line = line.strip()
            if not line:
                continue
            try:
                reports.append(parse_report(line))
            except WireFormatError as exc:
                raise SystemExit(f"{path}:{lineno}: {exc}")
    return reports


def _cmd_simulate(args: argparse.Namespace) -> int:
    config = load_deployment(args.config)
    scenario = config.scenario(seed=args.seed)
    reports, truth = emit(scenario)
    with open(args.out, "w", encoding="utf-8") as stream:
        for report in reports:
            stream.write(format_report(report) + "\n")
    print(f"wrote {len(reports)} reports to {args.out}")
    if args.truth_out:
        with open(args.truth_out, "w", encoding="utf-8") as stream:
            stream.write("tag_id,t_s,x_m,y_m\n")
            for s in truth:
                stream.write(f"{s.tag_id},{s.t_s},{repr(s.x_m)},{repr(s.y_m)}\n")
        print(f"wrote {len(truth)} ground truth samples to {args.truth_out}")
    return 0


def _cmd_track(args: argparse.Namespace) -> int:
    config = load_deployment(args.config)
    reports = _read_reports(Path(args.reports))
    if not reports:
        logger.warning("input %s contains no reports; writing empty log", args.reports)
    records = run_offline(reports, config.tracker)
    with open(args.out, "w", encoding="utf-8") as stream:
        export_mod.write_trajectory_csv(records, stream)
    print(f"wrote {len(records)} trajectory records to {args.out}")
    return 0


def _cmd_serve(args: argparse.Namespace) -> int:
    config = load_deployment(args.config)
    server = IngestServer(config, log_path=args.out, host=args.host, port=args.port).start()
    host, port = server.address
    print(f"ingest listening on {host}:{port}, logging to {args.out} (Ctrl-C to stop)")
    try:
        while server.running:
            server.join(timeout=1.0)
    except KeyboardInterrupt:
        print("stopping")
    finally:
        server.stop()
        print(
            f"{len(server.records)} records, {server.late_count} late reports dropped, "
            f"{server.parse_error_count} parse errors"
        )
    return 0


def _cmd_analyze(args: argparse.Namespace) -> int:
    config = load_deployment(args.config)
    with open(args.log, "r", encoding="utf-8") as stream:
        records = export_mod.read_trajectory_csv(stream)
    episodes = []
    for tag_id, traj in sorted(export_mod.trajectories_from_records(records).items()):
        episodes.extend(detect_episodes(traj, config.detector))
    with open(args.out, "w", encoding="utf-8") as stream:
        export_mod.write_episode_csv(episodes, stream)
    print(f"{len(episodes)} wandering episode(s) written to {args.out}")
    for e in episodes:
        print(
            f"  {e.tag_id}: {e.end_t - e.start_t:.0f} s, {e.distance_m:.0f} m walked "
            f"within {e.extent_m:.1f} m extent ({e.mean_speed_mps:.2f} m/s)"
        )
    return 0


def _cmd_replay(args: argparse.Namespace) -> int:
    host, _, port = args.to.rpartition(":")
    if not host or not port.isdigit():
        raise SystemExit(f"--to must be host:port, got {args.to!r}")
    sent = replay_file(args.reports, host, int(port), speed=args.speed)
    print(f"replayed {sent} reports to {args.to} at {args.speed:g}x")
    return 0


def _cmd_export(args: argparse.Namespace) -> int:
    with open(args.log, "r", encoding="utf-8") as stream:
        records = export_mod.read_trajectory_csv(stream)
    with open(args.out, "w", encoding="utf-8") as stream:
        if args.format == "csv":
            export_mod.write_trajectory_csv(records, stream)
        else:
            export_mod.write_geojson(records, stream)
    print(f"exported {len(records)} records to {args.out} as {args.format}")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="wandertrack", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="run a scenario, write a raw report file")
    p.add_argument("--config", required=True, help="deployment YAML with a scenario section")
    p.add_argument("--seed", type=int, default=None, help="override the scenario seed")
    p.add_argument("--out", required=True, help="report file to write")
    p.add_argument("--truth-out", default=None, help="also write 1 Hz ground truth CSV")
    p.set_defaults(func=_cmd_simulate)

    p = sub.add_parser("track", help="batch-track a report file into a trajectory log")
    p.add_argument("reports", help="raw report file")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="trajectory log CSV to write")
    p.set_defaults(func=_cmd_track)

    p = sub.add_parser("serve", help="live ingest service on a TCP socket")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="trajectory log CSV, appended live")
    p.add_argument("--host", default=None, help="override the configured listen host")
    p.add_argument("--port", type=int, default=None, help="override the configured listen port")
    p.set_defaults(func=_cmd_serve)

    p = sub.add_parser("analyze", help="detect wandering episodes in a trajectory log")
    p.add_argument("log", help="trajectory log CSV")
    p.add_argument("--config", required=True)
    p.add_argument("--out", required=True, help="episode report CSV to write")
    p.set_defaults(func=_cmd_analyze)

    p = sub.add_parser("replay", help="stream a report file to an ingest service")
    p.add_argument("reports", help="raw report file")
    p.add_argument("--to", required=True, help="host:port of the ingest service")
    p.add_argument("--speed", type=float, default=1.0, help="replay speed factor")
    p.set_defaults(func=_cmd_replay)

    p = sub.add_parser("export", help="convert a trajectory log to csv or geojson")
    p.add_argument("log", help="trajectory log CSV")
    p.add_argument("--format", choices=("csv", "geojson"), default="geojson")
    p.add_argument("--out", required=True)
    p.set_defaults(func=_cmd_export)

    return parser


def main(argv: list[str] | None = None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(levelname)s %(name)s: %(message)s")
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        raise SystemExit(f"config error: {exc}")
    except OSError as exc:
        raise SystemExit(f"io error: {exc}")


if __name__ == "__main__":
    sys.exit(main())
