"""BLE RSS indoor tracking toolkit.

Turns per-receiver signal strength reports from fixed anchors into planar
position estimates via an extended Kalman filter, simulates whole radio
deployments for closed-loop testing, and detects wandering episodes
(sustained movement confined to a small area) in the resulting
trajectories.
"""

from .analytics import (
    DetectorParams,
    PathStats,
    Trajectory,
    WanderEpisode,
    detect_episodes,
    path_length,
    spatial_extent,
    summarize,
)
from .config import DeploymentConfig, IngestOptions, load_deployment
from .ekf import (
    AnchorConfig,
    MotionModel,
    StateEstimate,
    TrackerConfig,
    init_from_frame,
    measurement_jacobian,
    pathloss_rss,
    predict,
    step,
    update,
)
from .ingest import IngestServer, replay_file, serve_ingest
from .pipeline import (
    AnchorObservation,
    MeasurementFrame,
    PacketObservation,
    RawReport,
    assemble_frame,
    packet_mean,
    window_average,
)
from .simulate import (
    GroundTruthSample,
    NoiseModel,
    Scenario,
    TrajectoryScript,
    emit,
    make_pacing_script,
    position_at,
)
from .tracking import TrackingSession, TrajectoryLogRecord, run_offline
from .wire import format_report, parse_report

__version__ = "0.1.0"

__all__ = [
    "AnchorConfig",
    "AnchorObservation",
    "DeploymentConfig",
    "DetectorParams",
    "GroundTruthSample",
    "IngestOptions",
    "IngestServer",
    "MeasurementFrame",
    "MotionModel",
    "NoiseModel",
    "PacketObservation",
    "PathStats",
    "RawReport",
    "Scenario",
    "StateEstimate",
    "TrackerConfig",
    "TrackingSession",
    "Trajectory",
    "TrajectoryLogRecord",
    "TrajectoryScript",
    "WanderEpisode",
    "assemble_frame",
    "detect_episodes",
    "emit",
    "format_report",
    "init_from_frame",
    "load_deployment",
    "make_pacing_script",
    "measurement_jacobian",
    "packet_mean",
    "parse_report",
    "path_length",
    "pathloss_rss",
    "position_at",
    "predict",
    "replay_file",
    "run_offline",
    "serve_ingest",
    "spatial_extent",
    "step",
    "summarize",
    "update",
    "window_average",
]
