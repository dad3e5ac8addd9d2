#!/usr/bin/env python3
"""Walk through the sensor model and one hand-driven filter track.

Shows how received signal strength falls off with distance, what the
per-second measurement frames look like, and how the EKF pulls a position
estimate out of them, step by step and without any simulator machinery.
"""

import math

import numpy as np

from wandertrack import (
    AnchorConfig,
    TrackerConfig,
    pathloss_rss,
    predict,
    step,
)
from wandertrack.pipeline import AnchorObservation, MeasurementFrame

# %% The log-distance path loss model
# An anchor hears a tag at p0 dBm from 1 m away; each decade of distance
# costs 10 * gamma dB.  gamma around 3.5 suits cluttered indoor spaces.

anchor = AnchorConfig("demo", position=(0.0, 0.0), p0=-59.0, gamma=3.5)
print("distance -> expected RSS")
for d in (0.5, 1.0, 2.0, 5.0, 10.0, 20.0, 30.0):
    rss = pathloss_rss(anchor, (d, 0.0), d_min=0.1)
    print(f"  {d:5.1f} m   {rss:7.1f} dBm")

# %% A square room with four anchors
anchors = (
    AnchorConfig("A1", (0.0, 0.0)),
    AnchorConfig("A2", (12.0, 0.0)),
    AnchorConfig("A3", (12.0, 10.0)),
    AnchorConfig("A4", (0.0, 10.0)),
)
config = TrackerConfig(anchors=anchors)


def frame_at(position, window_ms, noise, rng):
    """One second of averaged measurements for a tag at `position`."""
    observations = tuple(
        AnchorObservation(
            anchor_id=a.anchor_id,
            mean_rssi=pathloss_rss(a, position, config.d_min) + rng.normal(0.0, noise),
            sample_count=10,
            window_start_ms=window_ms,
            window_end_ms=window_ms + 1000,
        )
        for a in anchors
    )
    return MeasurementFrame("demo-tag", window_ms, observations)


# %% Track a tag walking a straight line at 0.8 m/s
# step() initializes from the first frame, then alternates prediction and
# correction.  Watch the estimate lock on within a few seconds.

rng = np.random.default_rng(7)
est = None
print("\n t   true pos      estimate        error   cov trace")
for k in range(20):
    true = (1.0 + 0.8 * k * math.sqrt(0.5), 1.0 + 0.8 * k * math.sqrt(0.5))
    est = step(est, frame_at(true, k * 1000, noise=1.0, rng=rng), config)
    err = math.dist(true, est.position)
    print(
        f"{k:3d}  ({true[0]:4.1f},{true[1]:4.1f})  "
        f"({est.position[0]:5.2f},{est.position[1]:5.2f})  {err:6.2f} m  {est.covariance.trace():8.2f}"
    )

# %% Coasting
# With no frame the filter predicts along the last velocity and the
# covariance trace grows: uncertainty accumulates until data returns.

print("\ncoasting (no measurements):")
for k in range(5):
    est = predict(est, config.motion)
    print(f"  +{k + 1} s: position ({est.position[0]:5.2f},{est.position[1]:5.2f}), "
          f"cov trace {est.covariance.trace():6.2f}")
