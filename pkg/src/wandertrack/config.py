"""Deployment and scenario configuration files.

Configs are YAML.  A deployment file describes the physical installation
(anchors with their sensor models) plus tracker, detector and ingest
tunables; it may additionally carry a `scenario` section scripting tags
and noise for the simulator.  The package ships `fig2-corridors`, a
reference two-corridor deployment with 7 wall-mounted anchors, resolvable
by name wherever a config path is accepted.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Any, Mapping

import yaml

from .analytics import DetectorParams
from .ekf import AnchorConfig, MotionModel, TrackerConfig
from .simulate import NoiseModel, Scenario, TrajectoryScript, make_pacing_script

BUNDLED_DEPLOYMENTS = ("fig2-corridors",)

DEFAULT_WATERMARK_MS = 2000


class ConfigError(ValueError):
    """Configuration file missing, unreadable or invalid."""


@dataclass(frozen=True)
class IngestOptions:
    listen_host: str = "127.0.0.1"
    listen_port: int = 7700
    reorder_watermark_ms: int = DEFAULT_WATERMARK_MS

    def __post_init__(self) -> None:
        if self.reorder_watermark_ms < 0:
            raise ConfigError("reorder_watermark_ms must be >= 0")


@dataclass(frozen=True)
class DeploymentConfig:
    """Validated contents of one deployment file."""

    name: str
    area: tuple[float, float]
    tracker: TrackerConfig
    detector: DetectorParams = DetectorParams()
    ingest: IngestOptions = IngestOptions()
    scenario_spec: Mapping[str, Any] | None = field(default=None, repr=False)

    @property
    def anchors(self) -> tuple[AnchorConfig, ...]:
        return self.tracker.anchors

    def scenario(self, seed: int | None = None) -> Scenario:
        """Build the simulator scenario scripted in this config.

        `seed` overrides the file's seed, keeping one file reusable across
        Monte-Carlo repetitions.
        """
        if self.scenario_spec is None:
            raise ConfigError(f"config {self.name!r} has no scenario section")
        return _build_scenario(self, self.scenario_spec, seed)


def _require(mapping: Mapping[str, Any], key: str, context: str) -> Any:
    if key not in mapping:
        raise ConfigError(f"{context}: missing required key {key!r}")
    return mapping[key]


def _build_anchor(spec: Mapping[str, Any]) -> AnchorConfig:
    try:
        return AnchorConfig(
            anchor_id=str(_require(spec, "id", "anchor")),
            position=(float(_require(spec, "x", "anchor")), float(_require(spec, "y", "anchor"))),
            p0=float(spec.get("p0", -59.0)),
            gamma=float(spec.get("gamma", 3.5)),
            d0=float(spec.get("d0", 1.0)),
            sigma_rss=float(spec.get("sigma_rss", 4.0)),
        )
    except ValueError as exc:
        raise ConfigError(f"anchor {spec.get('id', '?')!r}: {exc}") from exc


def _build_scenario(config: DeploymentConfig, spec: Mapping[str, Any], seed: int | None) -> Scenario:
    duration_s = float(_require(spec, "duration_s", "scenario"))
    noise_spec = spec.get("noise", {})
    noise = NoiseModel(
        sigma_db=float(noise_spec.get("sigma_db", 0.0)),
        anchor_bias_db=dict(noise_spec.get("anchor_bias_db", {})),
        drop_probability=float(noise_spec.get("drop_probability", 0.0)),
    )
    scripts = []
    for tag_spec in _require(spec, "tags", "scenario"):
        tag_id = str(_require(tag_spec, "tag_id", "scenario tag"))
        if "pacing" in tag_spec:
            pacing = tag_spec["pacing"]
            scripts.append(
                make_pacing_script(
                    tag_id=tag_id,
                    center=tuple(float(v) for v in _require(pacing, "center", "pacing")),
                    path_length_m=float(_require(pacing, "path_length_m", "pacing")),
                    speed_mps=float(_require(pacing, "speed_mps", "pacing")),
                    duration_s=duration_s,
                )
            )
        elif "waypoints" in tag_spec:
            waypoints = tuple(
                (float(t), float(x), float(y)) for t, x, y in tag_spec["waypoints"]
            )
            scripts.append(TrajectoryScript(tag_id=tag_id, waypoints=waypoints))
        else:
            raise ConfigError(f"scenario tag {tag_id!r} needs 'pacing' or 'waypoints'")
    if seed is None:
        seed = int(spec.get("seed", 0))
    try:
        return Scenario(
            name=str(spec.get("name", config.name)),
            area=config.area,
            anchors=config.anchors,
            tags=tuple(scripts),
            noise=noise,
            advertise_hz=float(spec.get("advertise_hz", 10.0)),
            duration_s=duration_s,
            seed=seed,
            t0_ms=int(spec.get("t0_ms", 0)),
            d_min=config.tracker.d_min,
        )
    except ValueError as exc:
        raise ConfigError(f"scenario: {exc}") from exc


def parse_deployment(raw: Mapping[str, Any], name_hint: str = "deployment") -> DeploymentConfig:
    if not isinstance(raw, Mapping):
        raise ConfigError("config root must be a mapping")
    name = str(raw.get("name", name_hint))
    area_spec = _require(raw, "area", name)
    area = (float(_require(area_spec, "width", "area")), float(_require(area_spec, "height", "area")))

    anchors = tuple(_build_anchor(a) for a in _require(raw, "anchors", name))

    motion_spec = raw.get("motion", {})
    tracker_spec = raw.get("tracker", {})
    try:
        motion = MotionModel(
            step_t=float(motion_spec.get("step_t", 1.0)),
            sigma_a=float(motion_spec.get("sigma_a", 0.5)),
        )
        tracker = TrackerConfig(
            anchors=anchors,
            motion=motion,
            min_anchors_for_update=int(tracker_spec.get("min_anchors_for_update", 1)),
            d_min=float(tracker_spec.get("d_min", 0.1)),
            init_covariance_diag=tuple(
                float(v) for v in tracker_spec.get("init_covariance_diag", (25.0, 1.0, 25.0, 1.0))
            ),
        )
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc

    detector_spec = raw.get("detector", {})
    try:
        detector = DetectorParams(
            window_s=float(detector_spec.get("window_s", 120.0)),
            stride_s=float(detector_spec.get("stride_s", 10.0)),
            min_distance_m=float(detector_spec.get("min_distance_m", 40.0)),
            min_loiter_ratio=float(detector_spec.get("min_loiter_ratio", 4.0)),
            min_speed_mps=float(detector_spec.get("min_speed_mps", 0.2)),
        )
    except ValueError as exc:
        raise ConfigError(f"{name}: {exc}") from exc

    ingest_spec = raw.get("ingest", {})
    listen = str(ingest_spec.get("listen", "127.0.0.1:7700"))
    host, _, port = listen.rpartition(":")
    if not host or not port.isdigit():
        raise ConfigError(f"{name}: ingest.listen must be host:port, got {listen!r}")
    ingest = IngestOptions(
        listen_host=host,
        listen_port=int(port),
        reorder_watermark_ms=int(ingest_spec.get("reorder_watermark_ms", DEFAULT_WATERMARK_MS)),
    )

    return DeploymentConfig(
        name=name,
        area=area,
        tracker=tracker,
        detector=detector,
        ingest=ingest,
        scenario_spec=raw.get("scenario"),
    )


def load_deployment(path_or_name: str | Path) -> DeploymentConfig:
    """Load a deployment file, or a bundled deployment by name."""
    path = Path(path_or_name)
    if path.is_file():
        text = path.read_text(encoding="utf-8")
        name_hint = path.stem
    elif str(path_or_name) in BUNDLED_DEPLOYMENTS:
        resource = resources.files("wandertrack") / "data" / f"{str(path_or_name).replace('-', '_')}.yaml"
        text = resource.read_text(encoding="utf-8")
        name_hint = str(path_or_name)
    else:
        raise ConfigError(
            f"{path_or_name!r} is neither a file nor a bundled deployment {BUNDLED_DEPLOYMENTS}"
        )
    try:
        raw = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"{path_or_name}: not valid YAML: {exc}") from exc
    return parse_deployment(raw, name_hint)
