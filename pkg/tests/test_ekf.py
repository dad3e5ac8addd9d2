import math

import numpy as np
import pytest

from wandertrack.ekf import (
    AnchorConfig,
    EmptyFrameError,
    MotionModel,
    NoInputError,
    StateEstimate,
    TooFewAnchorsError,
    TrackerConfig,
    UnknownAnchorError,
    expected_measurements,
    init_from_frame,
    measurement_jacobian,
    pathloss_rss,
    predict,
    process_noise,
    step,
    transition_matrix,
    update,
)
from wandertrack.pipeline import AnchorObservation, MeasurementFrame


def make_frame(values, window=0, tag="T1"):
    """Frame from {anchor_id: rssi} (sorted by anchor id, per frame contract)."""
    obs = tuple(
        AnchorObservation(
            anchor_id=a, mean_rssi=v, sample_count=10,
            window_start_ms=window, window_end_ms=window + 1000,
        )
        for a, v in sorted(values.items())
    )
    return MeasurementFrame(tag_id=tag, window_start_ms=window, observations=obs)


def estimate(x=0.0, vx=0.0, y=0.0, vy=0.0, cov=None, ts=0):
    if cov is None:
        cov = np.eye(4)
    return StateEstimate(state=np.array([x, vx, y, vy]), covariance=cov, timestamp_ms=ts)


SQUARE_ANCHORS = (
    AnchorConfig("A1", (0.0, 0.0)),
    AnchorConfig("A2", (10.0, 0.0)),
    AnchorConfig("A3", (10.0, 10.0)),
    AnchorConfig("A4", (0.0, 10.0)),
)


@pytest.fixture
def config():
    return TrackerConfig(anchors=SQUARE_ANCHORS)


class TestPathloss:
    def test_reference_distance_returns_p0(self):
        a = AnchorConfig("A", (0.0, 0.0), p0=-50.0, gamma=3.5, d0=1.0)
        assert pathloss_rss(a, (1.0, 0.0), 0.1) == pytest.approx(-50.0, abs=1e-12)

    def test_one_decade_costs_ten_gamma(self):
        a = AnchorConfig("A", (0.0, 0.0), p0=-50.0, gamma=3.5, d0=1.0)
        assert pathloss_rss(a, (10.0, 0.0), 0.1) == pytest.approx(-85.0, abs=1e-12)

    def test_two_meters_against_direct_evaluation(self):
        a = AnchorConfig("A", (0.0, 0.0), p0=-50.0, gamma=3.5, d0=1.0)
        expected = -50.0 - 10.0 * 3.5 * math.log10(2.0 / 1.0)  # = -60.53604...
        assert expected == pytest.approx(-60.5360, abs=5e-5)
        assert pathloss_rss(a, (2.0, 0.0), 0.1) == pytest.approx(expected, abs=1e-12)

    def test_distance_clamped_below_d_min(self):
        a = AnchorConfig("A", (0.0, 0.0), p0=-50.0, gamma=3.5)
        at_clamp = pathloss_rss(a, (0.1, 0.0), 0.1)
        assert pathloss_rss(a, (0.0, 0.0), 0.1) == at_clamp
        assert pathloss_rss(a, (0.01, 0.0), 0.1) == at_clamp


class TestPredict:
    def test_zero_velocity_fixed_point(self):
        est = estimate()
        out = predict(est, MotionModel(step_t=2.5, sigma_a=1.0))
        np.testing.assert_allclose(out.state, np.zeros(4))

    def test_linear_motion(self):
        est = estimate(x=1.0, vx=2.0, y=3.0, vy=-1.0)
        out = predict(est, MotionModel(step_t=0.5, sigma_a=1.0))
        np.testing.assert_allclose(out.state, [2.0, 2.0, 2.5, -1.0])

    def test_process_noise_against_outer_product(self):
        # oracle: Q block = Gamma Gamma^T sigma_a^2 with Gamma = [T^2/2, T]
        t, sigma = 1.0, 1.0
        gamma = np.array([t**2 / 2.0, t])
        block = np.outer(gamma, gamma) * sigma**2
        np.testing.assert_allclose(block, [[0.25, 0.5], [0.5, 1.0]])
        q = process_noise(t, sigma)
        np.testing.assert_allclose(q[0:2, 0:2], block)
        np.testing.assert_allclose(q[2:4, 2:4], block)
        assert np.all(q[0:2, 2:4] == 0) and np.all(q[2:4, 0:2] == 0)

    @pytest.mark.parametrize("t,sigma", [(0.5, 0.3), (1.0, 0.5), (2.0, 2.0)])
    def test_process_noise_matches_outer_product_generally(self, t, sigma):
        gamma = np.array([t**2 / 2.0, t])
        block = np.outer(gamma, gamma) * sigma**2
        np.testing.assert_allclose(process_noise(t, sigma)[2:4, 2:4], block, rtol=1e-12)

    def test_trace_strictly_grows(self):
        rng = np.random.default_rng(7)
        est = estimate(cov=np.diag(rng.uniform(0.1, 5.0, 4)))
        for _ in range(20):
            nxt = predict(est, MotionModel(step_t=1.0, sigma_a=0.5))
            assert nxt.covariance.trace() > est.covariance.trace()
            est = nxt

    def test_timestamp_advances(self):
        out = predict(estimate(ts=5000), MotionModel(step_t=1.0, sigma_a=0.5))
        assert out.timestamp_ms == 6000

    def test_transition_matrix_blocks(self):
        f = transition_matrix(0.25)
        np.testing.assert_allclose(f @ np.array([1.0, 4.0, 2.0, -4.0]), [2.0, 4.0, 1.0, -4.0])


class TestExpectedMeasurements:
    def test_single_anchor_at_reference_distance(self):
        a = AnchorConfig("A", (0.0, 0.0), p0=-59.0, d0=1.0)
        est = estimate(x=1.0, y=0.0)
        np.testing.assert_allclose(expected_measurements(est, [a], 0.1), [-59.0])

    def test_equidistant_anchors_match(self):
        anchors = [AnchorConfig("A", (0.0, 0.0)), AnchorConfig("B", (10.0, 10.0))]
        est = estimate(x=5.0, y=5.0)
        h = expected_measurements(est, anchors, 0.1)
        assert h[0] == h[1]

    def test_componentwise_equals_pathloss(self):
        rng = np.random.default_rng(42)
        for _ in range(20):
            anchors = [
                AnchorConfig(f"A{i}", tuple(rng.uniform(0, 30, 2)), gamma=rng.uniform(2, 5))
                for i in range(3)
            ]
            est = estimate(x=rng.uniform(0, 30), y=rng.uniform(0, 30))
            h = expected_measurements(est, anchors, 0.1)
            for i, a in enumerate(anchors):
                assert h[i] == pathloss_rss(a, est.position, 0.1)


def finite_difference_gradient(anchor, pos, d_min, step_m=1e-6):
    def f(p):
        return pathloss_rss(anchor, p, d_min)

    ddx = (f((pos[0] + step_m, pos[1])) - f((pos[0] - step_m, pos[1]))) / (2 * step_m)
    ddy = (f((pos[0], pos[1] + step_m)) - f((pos[0], pos[1] - step_m))) / (2 * step_m)
    return ddx, ddy


class TestMeasurementJacobian:
    def test_worked_example_three_four_five(self):
        a = AnchorConfig("A", (3.0, 4.0), gamma=3.5)
        est = estimate()
        jac = measurement_jacobian(est, [a], 0.1)
        c = 10.0 * 3.5 / math.log(10.0)
        assert c == pytest.approx(15.2003, abs=5e-5)
        assert jac[0, 0] == pytest.approx(1.8240, abs=5e-5)
        assert jac[0, 2] == pytest.approx(2.4320, abs=5e-5)
        ddx, ddy = finite_difference_gradient(a, (0.0, 0.0), 0.1)
        assert jac[0, 0] == pytest.approx(ddx, rel=1e-6)
        assert jac[0, 2] == pytest.approx(ddy, rel=1e-6)

    def test_on_axis_anchor_has_zero_cross_derivative(self):
        a = AnchorConfig("A", (7.0, 0.0))
        jac = measurement_jacobian(estimate(), [a], 0.1)
        assert jac[0, 2] == 0.0

    def test_velocity_columns_zero(self):
        rng = np.random.default_rng(3)
        anchors = [AnchorConfig(f"A{i}", tuple(rng.uniform(-20, 20, 2))) for i in range(5)]
        jac = measurement_jacobian(estimate(x=1.0, y=2.0), anchors, 0.1)
        assert np.all(jac[:, 1] == 0.0) and np.all(jac[:, 3] == 0.0)

    def test_against_finite_differences_random_geometry(self):
        rng = np.random.default_rng(2024)
        for _ in range(200):
            pos = tuple(rng.uniform(-30, 30, 2))
            offset = rng.uniform(0.5, 25.0) * _unit(rng)
            anchor = AnchorConfig("A", (pos[0] + offset[0], pos[1] + offset[1]), gamma=rng.uniform(2.0, 5.0))
            jac = measurement_jacobian(estimate(x=pos[0], y=pos[1]), [anchor], 0.1)
            ddx, ddy = finite_difference_gradient(anchor, pos, 0.1)
            assert jac[0, 0] == pytest.approx(ddx, rel=1e-6, abs=1e-9)
            assert jac[0, 2] == pytest.approx(ddy, rel=1e-6, abs=1e-9)


def _unit(rng):
    phi = rng.uniform(0, 2 * math.pi)
    return np.array([math.cos(phi), math.sin(phi)])


class TestUpdate:
    def test_zero_innovation_keeps_state(self, config):
        est = estimate(x=4.0, y=6.0, cov=np.diag([2.0, 0.5, 2.0, 0.5]))
        values = {a.anchor_id: pathloss_rss(a, est.position, config.d_min) for a in config.anchors}
        out = update(est, make_frame(values), config)
        np.testing.assert_allclose(out.state, est.state, atol=1e-12)
        assert out.covariance.trace() <= est.covariance.trace() + 1e-12

    def test_huge_measurement_noise_freezes_state(self):
        anchors = tuple(
            AnchorConfig(a.anchor_id, a.position, sigma_rss=1e6) for a in SQUARE_ANCHORS
        )
        config = TrackerConfig(anchors=anchors)
        est = estimate(x=4.0, y=6.0)
        values = {a.anchor_id: -75.0 for a in anchors}
        out = update(est, make_frame(values), config)
        assert np.linalg.norm(out.state - est.state) < 1e-6

    def test_single_anchor_against_dense_arithmetic(self):
        # oracle: the scalar-measurement Kalman equations written out
        # directly, sharing no code with the filter.
        anchor = AnchorConfig("A1", (3.0, 4.0), p0=-50.0, gamma=3.5, d0=1.0, sigma_rss=4.0)
        config = TrackerConfig(anchors=(anchor,))
        p = np.diag([1.0, 1.0, 1.0, 1.0])
        x = np.array([1.0, 0.2, 1.0, -0.1])
        est = StateEstimate(state=x, covariance=p, timestamp_ms=0)
        z = -68.0

        dx, dy = x[0] - 3.0, x[2] - 4.0
        d = math.hypot(dx, dy)
        h_val = -50.0 - 35.0 * math.log10(d)
        c = 35.0 / math.log(10.0)
        h_row = np.array([-c * dx / d**2, 0.0, -c * dy / d**2, 0.0])
        s = float(h_row @ p @ h_row) + 16.0
        k = (p @ h_row) / s
        expected_state = x + k * (z - h_val)
        expected_cov = (np.eye(4) - np.outer(k, h_row)) @ p
        expected_cov = (expected_cov + expected_cov.T) / 2.0

        out = update(est, make_frame({"A1": z}), config)
        np.testing.assert_allclose(out.state, expected_state, atol=1e-12)
        np.testing.assert_allclose(out.covariance, expected_cov, atol=1e-12)

    def test_too_few_anchors(self, config):
        strict = TrackerConfig(anchors=SQUARE_ANCHORS, min_anchors_for_update=3)
        est = estimate(x=5.0, y=5.0)
        with pytest.raises(TooFewAnchorsError):
            update(est, make_frame({"A1": -70.0, "A2": -71.0}), strict)

    def test_unknown_anchor(self, config):
        est = estimate(x=5.0, y=5.0)
        with pytest.raises(UnknownAnchorError):
            update(est, make_frame({"A9": -70.0}), config)

    def test_covariance_stays_symmetric(self, config):
        rng = np.random.default_rng(11)
        est = estimate(x=5.0, y=5.0, cov=np.diag([25.0, 1.0, 25.0, 1.0]))
        for k in range(100):
            est = predict(est, config.motion)
            values = {
                a.anchor_id: pathloss_rss(a, (5.0, 5.0), 0.1) + rng.normal(0, 1.0)
                for a in config.anchors
            }
            est = update(est, make_frame(values), config)
            assert np.abs(est.covariance - est.covariance.T).max() < 1e-9
            assert np.linalg.eigvalsh(est.covariance)[0] >= -1e-9

    def test_anchor_order_invariance(self, config):
        # the update must not care how (z, h, H, R) rows are permuted
        est = estimate(x=3.0, y=7.0, cov=np.diag([4.0, 1.0, 4.0, 1.0]))
        values = {"A1": -72.0, "A2": -68.0, "A3": -80.0, "A4": -75.5}
        baseline = update(est, make_frame(values), config)

        anchors = list(config.anchors)
        z = np.array([values[a.anchor_id] for a in anchors])
        for perm_seed in range(5):
            rng = np.random.default_rng(perm_seed)
            order = rng.permutation(len(anchors))
            perm_anchors = [anchors[i] for i in order]
            perm_z = z[order]
            h = expected_measurements(est, perm_anchors, config.d_min)
            jac = measurement_jacobian(est, perm_anchors, config.d_min)
            r = np.diag([a.sigma_rss**2 for a in perm_anchors])
            s = jac @ est.covariance @ jac.T + r
            k = est.covariance @ jac.T @ np.linalg.inv(s)
            state = est.state + k @ (perm_z - h)
            np.testing.assert_allclose(state, baseline.state, atol=1e-9)


class TestInitFromFrame:
    def test_single_anchor_centroid(self, config):
        single = TrackerConfig(anchors=(AnchorConfig("A1", (5.0, 5.0)),))
        out = init_from_frame(make_frame({"A1": -70.0}), single)
        assert out.position == (5.0, 5.0)
        assert out.velocity == (0.0, 0.0)
        np.testing.assert_allclose(np.diag(out.covariance), [25.0, 1.0, 25.0, 1.0])

    def test_equal_rss_symmetric_midpoint(self):
        config = TrackerConfig(
            anchors=(AnchorConfig("A1", (0.0, 0.0)), AnchorConfig("A2", (10.0, 0.0)))
        )
        out = init_from_frame(make_frame({"A1": -70.0, "A2": -70.0}), config)
        assert out.position == pytest.approx((5.0, 0.0))

    def test_three_anchors_against_weighted_mean(self, config):
        values = {"A1": -60.0, "A2": -75.0, "A3": -82.5}
        out = init_from_frame(make_frame(values), config)
        # oracle: direct weighted average with linear-power weights
        anchors = {a.anchor_id: a.position for a in config.anchors}
        wsum = sum(10 ** (v / 10.0) for v in values.values())
        ex = sum(10 ** (v / 10.0) * anchors[a][0] for a, v in values.items()) / wsum
        ey = sum(10 ** (v / 10.0) * anchors[a][1] for a, v in values.items()) / wsum
        assert out.position == pytest.approx((ex, ey), abs=1e-12)

    def test_empty_frame(self, config):
        with pytest.raises(EmptyFrameError):
            init_from_frame(MeasurementFrame("T1", 0, ()), config)

    def test_timestamp_is_window_start(self, config):
        out = init_from_frame(make_frame({"A1": -70.0}, window=42000), config)
        assert out.timestamp_ms == 42000


class TestStep:
    def test_no_input(self, config):
        with pytest.raises(NoInputError):
            step(None, None, config)

    def test_init_composition(self, config):
        frame = make_frame({"A1": -70.0, "A2": -71.0})
        out = init_from_frame(frame, config)
        via_step = step(None, frame, config)
        np.testing.assert_array_equal(via_step.state, out.state)
        np.testing.assert_array_equal(via_step.covariance, out.covariance)

    def test_coast_composition(self, config):
        est = estimate(x=2.0, vx=0.5, y=3.0)
        out = step(est, None, config)
        expected = predict(est, config.motion)
        np.testing.assert_allclose(out.state, expected.state)
        np.testing.assert_allclose(out.covariance, expected.covariance)

    def test_predict_update_composition(self, config):
        est = estimate(x=5.0, y=5.0, cov=np.diag([4.0, 1.0, 4.0, 1.0]), ts=0)
        values = {"A1": -72.0, "A2": -68.0, "A3": -80.0}
        frame = make_frame(values, window=1000)
        out = step(est, frame, config)
        manual = update(predict(est, config.motion), frame, config)
        np.testing.assert_allclose(out.state, manual.state)
        np.testing.assert_allclose(out.covariance, manual.covariance)
        assert out.timestamp_ms == 1000

    def test_unusable_frame_keeps_prediction(self, config):
        strict = TrackerConfig(anchors=SQUARE_ANCHORS, min_anchors_for_update=4)
        est = estimate(x=5.0, vx=1.0, y=5.0)
        out = step(est, make_frame({"A1": -70.0}), strict)
        expected = predict(est, strict.motion)
        np.testing.assert_allclose(out.state, expected.state)


class TestZeroNoiseConvergence:
    def test_static_tag_converges(self):
        anchors = tuple(
            AnchorConfig(f"A{i}", pos, sigma_rss=0.01)
            for i, pos in enumerate([(0.0, 0.0), (10.0, 0.0), (10.0, 10.0), (0.0, 10.0)])
        )
        config = TrackerConfig(anchors=anchors)
        true_pos = (6.5, 3.0)
        values = {a.anchor_id: pathloss_rss(a, true_pos, config.d_min) for a in anchors}
        est = None
        for k in range(30):
            est = step(est, make_frame(values, window=k * 1000), config)
        err = math.hypot(est.position[0] - true_pos[0], est.position[1] - true_pos[1])
        assert err < 0.1


class TestConfigValidation:
    def test_bad_gamma(self):
        with pytest.raises(ValueError):
            AnchorConfig("A", (0.0, 0.0), gamma=0.5)

    def test_bad_motion(self):
        with pytest.raises(ValueError):
            MotionModel(step_t=0.0)
        with pytest.raises(ValueError):
            MotionModel(sigma_a=-1.0)

    def test_duplicate_anchor_ids(self):
        with pytest.raises(ValueError):
            TrackerConfig(anchors=(AnchorConfig("A", (0, 0)), AnchorConfig("A", (1, 1))))

    def test_state_shape_checked(self):
        with pytest.raises(ValueError):
            StateEstimate(state=np.zeros(3), covariance=np.eye(4), timestamp_ms=0)
