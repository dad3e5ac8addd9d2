#!/usr/bin/env python3
"""Closed loop on the reference deployment: simulate, track, compare.

Runs a scripted tag through the fig2-corridors deployment, pushes the raw
reports through the offline tracking pipeline and compares estimates with
ground truth.  Saves a floor-plan figure and a GeoJSON export next to this
script.
"""

from pathlib import Path

import matplotlib

matplotlib.use("Agg")
import matplotlib.pyplot as plt
import numpy as np

from wandertrack import NoiseModel, Scenario, TrajectoryScript, emit, load_deployment, run_offline
from wandertrack.export import trajectories_from_records, write_geojson

OUT_DIR = Path(__file__).parent / "output"
OUT_DIR.mkdir(exist_ok=True)

# %% Scenario: a resident walks the long corridor, turns into the short one
config = load_deployment("fig2-corridors")
route = TrajectoryScript(
    "resident",
    waypoints=(
        (0.0, 28.0, 1.0),
        (54.0, 1.0, 1.0),    # down the long corridor at 0.5 m/s
        (60.0, 1.0, 4.0),    # around the junction
        (78.0, 1.0, 13.0),   # up the short corridor
        (96.0, 1.0, 4.0),    # and back
        (120.0, 13.0, 1.0),
    ),
)
scenario = Scenario(
    name="corridor-walk",
    area=config.area,
    anchors=config.anchors,
    tags=(route,),
    noise=NoiseModel(sigma_db=3.0),
    duration_s=120.0,
    seed=2024,
    d_min=config.tracker.d_min,
)

reports, truth = emit(scenario)
print(f"simulated {len(reports)} raw reports over {scenario.duration_s:.0f} s "
      f"({len(config.anchors)} anchors x 2 receivers x 10 Hz)")

# %% Track offline
records = run_offline(reports, config.tracker)
print(f"tracked {len(records)} per-second estimates")

errors = np.array(
    [np.hypot(r.x_m - t.x_m, r.y_m - t.y_m) for r, t in zip(records, truth)]
)
print(f"position error: median {np.median(errors):.2f} m, "
      f"p90 {np.percentile(errors, 90):.2f} m, max {errors.max():.2f} m")

# %% Floor plan figure
fig, ax = plt.subplots(figsize=(9, 5))
ax.plot([t.x_m for t in truth], [t.y_m for t in truth], "-", color="0.6", label="ground truth")
ax.plot([r.x_m for r in records], [r.y_m for r in records], ".-", ms=3, label="EKF estimate")
ax.scatter(
    [a.position[0] for a in config.anchors],
    [a.position[1] for a in config.anchors],
    marker="^", s=90, color="crimson", zorder=3, label="anchors",
)
for a in config.anchors:
    ax.annotate(a.anchor_id, a.position, textcoords="offset points", xytext=(4, 4), fontsize=8)
ax.set_xlim(-1, 31)
ax.set_ylim(-1, 16)
ax.set_xlabel("x [m]")
ax.set_ylabel("y [m]")
ax.set_title("fig2-corridors: estimated vs true trajectory")
ax.legend(loc="upper right")
ax.set_aspect("equal")
fig.tight_layout()
fig.savefig(OUT_DIR / "corridor_walk.png", dpi=140)
print(f"figure saved to {OUT_DIR / 'corridor_walk.png'}")

# %% GeoJSON export (planar meters; handy for deck.gl/kepler style tooling)
with open(OUT_DIR / "corridor_walk.geojson", "w") as stream:
    write_geojson(records, stream)
print(f"geojson saved to {OUT_DIR / 'corridor_walk.geojson'}")

# %% Per-second log records are plain rows
print("\nfirst five trajectory log records:")
for r in records[:5]:
    print(f"  t={r.t_ms / 1000:5.1f} s  pos=({r.x_m:5.2f},{r.y_m:5.2f})  "
          f"v=({r.vx_mps:+.2f},{r.vy_mps:+.2f})  anchors={r.n_anchors_used}")
