"""Planar constant-velocity EKF over log-distance RSS measurements.

The tracked state is the 4-vector [x, vx, y, vy] (meters, meters/second).
Prediction uses a discrete white-noise-acceleration motion model: between
filter steps the tag moves along a straight line at constant speed and
acceleration enters as process noise.  The correction step linearizes the
log-distance path loss model around the predicted position and fuses the
per-anchor averaged RSS values of one measurement frame.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .pipeline import MeasurementFrame

STATE_DIM = 4

_LN10 = math.log(10.0)


class FilterError(ValueError):
    """A tracker operation could not be applied."""


class TooFewAnchorsError(FilterError):
    """Frame carries fewer observations than the configured minimum."""


class UnknownAnchorError(FilterError):
    """Frame references an anchor id absent from the configuration."""


class SingularInnovationError(FilterError):
    """Innovation covariance is not invertible; the prediction is kept."""


class EmptyFrameError(FilterError):
    """Initialization needs at least one anchor observation."""


class NoInputError(FilterError):
    """A filter step needs a previous estimate, a frame, or both."""


@dataclass(frozen=True)
class MotionModel:
    """Constant-velocity motion with white acceleration noise.

    step_t is the filter period in seconds, sigma_a the standard deviation
    of the acceleration treated as process noise (m/s^2).
    """

    step_t: float = 1.0
    sigma_a: float = 0.5

    def __post_init__(self) -> None:
        if not 0.0 < self.step_t <= 10.0:
            raise ValueError(f"step_t must be in (0, 10] s, got {self.step_t}")
        if not 0.0 < self.sigma_a <= 100.0:
            raise ValueError(f"sigma_a must be in (0, 100] m/s^2, got {self.sigma_a}")


@dataclass(frozen=True)
class AnchorConfig:
    """A fixed receiver node with its log-distance sensor model.

    p0 is the RSS at the reference distance d0 (dBm), gamma the path loss
    exponent and sigma_rss the measurement noise standard deviation (dB)
    assumed for this anchor's per-second averages.
    """

    anchor_id: str
    position: tuple[float, float]
    p0: float = -59.0
    gamma: float = 3.5
    d0: float = 1.0
    sigma_rss: float = 4.0

    def __post_init__(self) -> None:
        if not 1.0 < self.gamma <= 6.0:
            raise ValueError(f"gamma must be in (1, 6], got {self.gamma}")
        if self.d0 <= 0.0:
            raise ValueError("d0 must be positive")
        if self.sigma_rss <= 0.0:
            raise ValueError("sigma_rss must be positive")


@dataclass(frozen=True)
class TrackerConfig:
    """Everything the tracker needs to run: anchors, motion model, knobs."""

    anchors: tuple[AnchorConfig, ...]
    motion: MotionModel = MotionModel()
    min_anchors_for_update: int = 1
    d_min: float = 0.1
    init_covariance_diag: tuple[float, float, float, float] = (25.0, 1.0, 25.0, 1.0)

    def __post_init__(self) -> None:
        if not self.anchors:
            raise ValueError("at least one anchor is required")
        ids = [a.anchor_id for a in self.anchors]
        if len(set(ids)) != len(ids):
            raise ValueError("anchor ids must be unique")
        if self.min_anchors_for_update < 1:
            raise ValueError("min_anchors_for_update must be >= 1")
        if self.d_min <= 0.0:
            raise ValueError("d_min must be positive")
        if len(self.init_covariance_diag) != STATE_DIM:
            raise ValueError("init_covariance_diag must have 4 entries")

    @cached_property
    def anchor_by_id(self) -> dict[str, AnchorConfig]:
        return {a.anchor_id: a for a in self.anchors}


@dataclass(frozen=True, eq=False)
class StateEstimate:
    """Kinematic state [x, vx, y, vy] with its 4x4 covariance."""

    state: np.ndarray
    covariance: np.ndarray
    timestamp_ms: int

    def __post_init__(self) -> None:
        object.__setattr__(self, "state", np.asarray(self.state, dtype=float))
        object.__setattr__(self, "covariance", np.asarray(self.covariance, dtype=float))
        if self.state.shape != (STATE_DIM,):
            raise ValueError(f"state must be a 4-vector, got shape {self.state.shape}")
        if self.covariance.shape != (STATE_DIM, STATE_DIM):
            raise ValueError(f"covariance must be 4x4, got shape {self.covariance.shape}")

    @property
    def position(self) -> tuple[float, float]:
        return (float(self.state[0]), float(self.state[2]))

    @property
    def velocity(self) -> tuple[float, float]:
        return (float(self.state[1]), float(self.state[3]))


def transition_matrix(step_t: float) -> np.ndarray:
    """Constant-velocity transition, block diagonal per axis."""
    t = float(step_t)
    return np.array(
        [
            [1.0, t, 0.0, 0.0],
            [0.0, 1.0, 0.0, 0.0],
            [0.0, 0.0, 1.0, t],
            [0.0, 0.0, 0.0, 1.0],
        ]
    )


def process_noise(step_t: float, sigma_a: float) -> np.ndarray:
    """White-noise-acceleration process noise.

    Per axis the block is sigma_a^2 * [[T^4/4, T^3/2], [T^3/2, T^2]],
    the outer product of the acceleration influence vector [T^2/2, T].
    """
    t = float(step_t)
    var = float(sigma_a) ** 2
    block = var * np.array([[t**4 / 4.0, t**3 / 2.0], [t**3 / 2.0, t**2]])
    q = np.zeros((STATE_DIM, STATE_DIM))
    q[0:2, 0:2] = block
    q[2:4, 2:4] = block
    return q


def pathloss_rss(anchor: AnchorConfig, position: tuple[float, float], d_min: float) -> float:
    """Expected RSS at an anchor for a tag at the given planar position.

    Log-distance model: p0 - 10 * gamma * log10(d / d0), with the distance
    clamped below by d_min to remove the singularity at d = 0.
    """
    dx = position[0] - anchor.position[0]
    dy = position[1] - anchor.position[1]
    d = max(math.hypot(dx, dy), d_min)
    return anchor.p0 - 10.0 * anchor.gamma * math.log10(d / anchor.d0)


def predict(est: StateEstimate, motion: MotionModel) -> StateEstimate:
    """Propagate the estimate one step along the constant-velocity model."""
    f = transition_matrix(motion.step_t)
    q = process_noise(motion.step_t, motion.sigma_a)
    state = f @ est.state
    cov = f @ est.covariance @ f.T + q
    return StateEstimate(
        state=state,
        covariance=cov,
        timestamp_ms=est.timestamp_ms + round(motion.step_t * 1000.0),
    )


def expected_measurements(
    est: StateEstimate, anchors_in_frame: list[AnchorConfig], d_min: float
) -> np.ndarray:
    """Predicted RSS vector, one entry per frame anchor (frame order)."""
    pos = est.position
    return np.array([pathloss_rss(a, pos, d_min) for a in anchors_in_frame])


def measurement_jacobian(
    est: StateEstimate, anchors_in_frame: list[AnchorConfig], d_min: float
) -> np.ndarray:
    """Jacobian of the RSS vector with respect to the state, shape (n, 4).

    Row n is [-c*(x - xn)/d^2, 0, -c*(y - yn)/d^2, 0] with
    c = 10*gamma_n/ln(10) and d the clamped planar distance.  The model
    does not depend on velocity, so those columns are zero.
    """
    x, y = est.position
    h = np.zeros((len(anchors_in_frame), STATE_DIM))
    for i, a in enumerate(anchors_in_frame):
        dx = x - a.position[0]
        dy = y - a.position[1]
        d = max(math.hypot(dx, dy), d_min)
        c = 10.0 * a.gamma / _LN10
        h[i, 0] = -c * dx / (d * d)
        h[i, 2] = -c * dy / (d * d)
    return h


def _frame_anchors(frame: MeasurementFrame, config: TrackerConfig) -> list[AnchorConfig]:
    anchors = []
    for obs in frame.observations:
        anchor = config.anchor_by_id.get(obs.anchor_id)
        if anchor is None:
            raise UnknownAnchorError(f"frame references unconfigured anchor {obs.anchor_id!r}")
        anchors.append(anchor)
    return anchors


def update(est_pred: StateEstimate, frame: MeasurementFrame, config: TrackerConfig) -> StateEstimate:
    """Correct a predicted estimate with one measurement frame.

    Standard EKF correction: K = P H^T (H P H^T + R)^-1, state plus
    K times innovation, covariance (I - K H) P symmetrized afterwards.
    R is diagonal with each anchor's sigma_rss squared.
    """
    anchors = _frame_anchors(frame, config)
    n = len(anchors)
    if n < config.min_anchors_for_update:
        raise TooFewAnchorsError(
            f"{n} anchor(s) in frame, need {config.min_anchors_for_update}"
        )
    z = np.array([obs.mean_rssi for obs in frame.observations])
    h = expected_measurements(est_pred, anchors, config.d_min)
    jac = measurement_jacobian(est_pred, anchors, config.d_min)
    r = np.diag([a.sigma_rss**2 for a in anchors])
    p = est_pred.covariance

    s = jac @ p @ jac.T + r
    s = (s + s.T) / 2.0
    eigvals = np.linalg.eigvalsh(s)
    if eigvals[0] <= 1e-12:
        raise SingularInnovationError(
            f"innovation covariance nearly singular (min eigenvalue {eigvals[0]:.3e})"
        )
    # K = P H^T S^-1, computed via a solve against the symmetric S.
    gain = np.linalg.solve(s, jac @ p).T

    state = est_pred.state + gain @ (z - h)
    cov = (np.eye(STATE_DIM) - gain @ jac) @ p
    cov = (cov + cov.T) / 2.0
    return StateEstimate(state=state, covariance=cov, timestamp_ms=est_pred.timestamp_ms)


def init_from_frame(frame: MeasurementFrame, config: TrackerConfig) -> StateEstimate:
    """Bootstrap an estimate from the first usable frame.

    The position is the centroid of the reporting anchors weighted by
    linear received power, 10^(RSS/10); strong anchors are close ones, so
    this lands in the right neighborhood.  Velocity starts at zero.
    """
    if not frame.observations:
        raise EmptyFrameError("cannot initialize from a frame with no observations")
    anchors = _frame_anchors(frame, config)
    weights = np.array([10.0 ** (obs.mean_rssi / 10.0) for obs in frame.observations])
    positions = np.array([a.position for a in anchors])
    centroid = weights @ positions / weights.sum()
    state = np.array([centroid[0], 0.0, centroid[1], 0.0])
    cov = np.diag(config.init_covariance_diag).astype(float)
    return StateEstimate(state=state, covariance=cov, timestamp_ms=frame.window_start_ms)


def step(
    est: StateEstimate | None, frame: MeasurementFrame | None, config: TrackerConfig
) -> StateEstimate:
    """One filter iteration: initialize, coast, or predict-and-correct.

    Without a previous estimate the frame seeds a new track.  Without a
    frame the step is prediction only.  With both, the prediction is
    corrected unless the frame is unusable (too few anchors, singular
    innovation), in which case the prediction is kept.
    """
    if est is None and frame is None:
        raise NoInputError("step needs an estimate, a frame, or both")
    if est is None:
        return init_from_frame(frame, config)
    pred = predict(est, config.motion)
    if frame is None:
        return pred
    try:
        return update(pred, frame, config)
    except (TooFewAnchorsError, SingularInnovationError):
        return pred
