import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpc.errors import NonFinite, NonInvertible
from lpc.ocp import (
    LossOracle,
    OcpConfig,
    fixed_point_gain,
    gain_pair,
    ocp_minimize,
    ocp_step,
    quadratic_loss,
)


def random_spd(rng, d, lo=0.5, hi=5.0):
    Qm, _ = np.linalg.qr(rng.normal(size=(d, d)))
    M = Qm @ np.diag(rng.uniform(lo, hi, d)) @ Qm.T
    return 0.5 * (M + M.T)


def companion_radius(H, r):
    """Spectral radius of the error recurrence (e_i, g_{i-1}) -> (e_{i+1}, g_i)."""
    d = H.shape[0]
    alpha, beta = gain_pair(H, r)
    T = np.block([
        [np.eye(d) - alpha @ H, -beta],
        [alpha @ H, beta],
    ])
    return max(abs(np.linalg.eigvals(T)))


class TestGainPair:
    def test_scalar(self):
        a, b = gain_pair([[1.0]], [[1.0]])
        np.testing.assert_allclose(a, [[0.5]])
        np.testing.assert_allclose(b, [[0.5]])

    def test_zero_hessian(self):
        a, b = gain_pair(np.zeros((2, 2)), np.eye(2))
        np.testing.assert_allclose(a, np.eye(2))
        np.testing.assert_allclose(b, np.eye(2))

    def test_singular_direction(self):
        a, b = gain_pair(np.diag([2.0, 0.0]), np.eye(2))
        np.testing.assert_allclose(a, np.diag([1 / 3, 1.0]))
        np.testing.assert_allclose(b, np.diag([1 / 3, 1.0]))

    def test_inverse_identity(self):
        rng = np.random.default_rng(3)
        H = random_spd(rng, 4)
        R = 0.1 * np.eye(4)
        a, _ = gain_pair(H, R)
        np.testing.assert_allclose(a @ (R + H), np.eye(4), atol=1e-10)

    def test_fallback_on_indefinite(self):
        # R_d + H = diag(-0.4, 1.1) is not positive definite; 0.8 I is the first that works
        a, b = gain_pair(np.diag([-0.5, 1.0]), 0.1)
        np.testing.assert_allclose(a, np.diag([1 / 0.3, 1 / 1.8]))
        np.testing.assert_allclose(b, a @ (0.8 * np.eye(2)))

    def test_non_invertible(self):
        with pytest.raises(NonInvertible):
            gain_pair(np.diag([-1e6, 1.0]), 0.1, fallback_max=2)


class TestOcpStep:
    def test_hand_example(self):
        w, g = ocp_step(np.array([0.5]), np.array([0.5]), np.array([[0.5]]), np.array([[0.5]]),
                        np.array([0.5]))
        assert g == pytest.approx([0.5])
        assert w == pytest.approx([0.0])

    def test_zero_gradient_fixpoint(self):
        w0 = np.array([1.0, -2.0])
        w, g = ocp_step(w0, np.zeros(2), np.eye(2), np.eye(2), np.zeros(2))
        assert np.array_equal(g, np.zeros(2))
        assert np.array_equal(w, w0)

    def test_base_case(self):
        alpha = np.array([[2.0, 1.0], [1.0, 3.0]])
        grad = np.array([0.3, -0.1])
        _, g = ocp_step(np.zeros(2), np.zeros(2), alpha, np.eye(2), grad)
        np.testing.assert_allclose(g, alpha @ grad)


class TestOcpMinimize:
    def test_scalar_quadratic_iterates(self):
        loss = quadratic_loss([[1.0]])
        w, tr = ocp_minimize(loss, [1.0], OcpConfig(R_d=1.0, max_iters=200, tol=1e-12))
        np.testing.assert_allclose(tr.iterates[:3, 0], [1.0, 0.5, 0.0], atol=1e-15)
        assert [r.step_norm for r in tr.records[:2]] == pytest.approx([0.5, 0.5])
        # at w = -0.25 the proposed step is exactly 0 while the gradient is not
        assert tr.iterates[3, 0] == pytest.approx(-0.25)
        assert tr.records[3].step_norm == 0.0 and len(tr) > 5
        assert abs(w[0]) < 1e-10
        assert tr.stop_reason == "tolerance"

    def test_zero_gradient_start(self):
        loss = quadratic_loss(np.eye(2), b=[1.0, 2.0])
        w, tr = ocp_minimize(loss, [1.0, 2.0], OcpConfig())
        assert np.array_equal(w, [1.0, 2.0])
        assert len(tr) == 1 and tr.iterations == 0

    @pytest.mark.parametrize("mode", ["interleaved", "unrolled", "inner_loop"])
    def test_singular_hessian(self, mode):
        loss = LossOracle(
            2,
            value=lambda z: float(z[0] ** 2),
            gradient=lambda z: np.array([2 * z[0], 0.0]),
            hessian=lambda z: np.diag([2.0, 0.0]),
        )
        w, tr = ocp_minimize(loss, [1.0, 1.0], OcpConfig(R_d=1.0, max_iters=200, tol=1e-12, mode=mode))
        assert np.all(tr.iterates[:, 1] == 1.0)
        assert abs(2 * w[0]) <= 1e-8

    def test_max_iters_trace_length(self):
        loss = quadratic_loss([[1.0]])
        _, tr = ocp_minimize(loss, [1.0], OcpConfig(R_d=100.0, max_iters=5, tol=1e-12))
        assert tr.stop_reason == "max_iters"
        assert len(tr) == 6 and tr.iterations == 5

    def test_tolerance_bookkeeping(self):
        rng = np.random.default_rng(0)
        loss = quadratic_loss(random_spd(rng, 3), b=rng.normal(size=3))
        _, tr = ocp_minimize(loss, np.zeros(3), OcpConfig(tol=1e-6, max_iters=500))
        assert tr.stop_reason == "tolerance"
        assert tr.records[-1].step_norm <= 1e-6
        assert all(r.step_norm > 1e-6 for r in tr.records[:-1])

    def test_measured_rate_matches_companion_radius(self):
        rng = np.random.default_rng(11)
        H = random_spd(rng, 3)
        w_star = rng.normal(size=3)
        loss = quadratic_loss(H, b=H @ w_star)
        _, tr = ocp_minimize(loss, w_star + 1.0, OcpConfig(R_d=0.1, max_iters=60, tol=1e-30))
        err = np.linalg.norm(tr.iterates - w_star, axis=1)
        rho = companion_radius(H, 0.1)
        # asymptotic slope of log error, fitted before it reaches round-off
        i = np.arange(len(err))
        tail = (i >= 10) & (err > 1e-12)
        measured = np.exp(np.polyfit(i[tail], np.log(err[tail]), 1)[0])
        assert measured == pytest.approx(rho, rel=0.1)
        assert err[min(60, len(err) - 1)] < 1e-10

    def test_scalar_radius_formula(self):
        h, r = 3.0, 0.5
        assert companion_radius(np.array([[h]]), r) == pytest.approx(np.sqrt(r / (r + h)))

    def test_unrolled_superlinear(self):
        H = np.diag([1.0, 4.0])
        loss = quadratic_loss(H)
        _, tr = ocp_minimize(loss, [1.0, 1.0], OcpConfig(R_d=1.0, mode="unrolled", max_iters=30, tol=1e-14))
        err = np.linalg.norm(tr.iterates, axis=1)
        ratios = err[1:8] / err[:7]
        assert np.all(np.diff(ratios) < 0)

    def test_inner_loop_is_newton(self):
        rng = np.random.default_rng(5)
        H = random_spd(rng, 4)
        b = rng.normal(size=4)
        loss = quadratic_loss(H, b=b)
        w, tr = ocp_minimize(loss, np.zeros(4), OcpConfig(R_d=0.1, mode="inner_loop"))
        np.testing.assert_allclose(tr.iterates[1], np.linalg.solve(H, b), atol=1e-8)
        assert tr.iterations == 1

    def test_every_step_refresh_on_nonquadratic(self):
        loss = LossOracle(
            1,
            value=lambda w: float(w[0] ** 4 + w[0] ** 2),
            gradient=lambda w: np.array([4 * w[0] ** 3 + 2 * w[0]]),
            hessian=lambda w: np.array([[12 * w[0] ** 2 + 2]]),
        )
        w, tr = ocp_minimize(loss, [2.0], OcpConfig(R_d=0.1, mode="inner_loop", hessian_refresh="every_step"))
        assert abs(w[0]) < 1e-5
        assert tr.stop_reason == "tolerance"

    def test_nonfinite(self):
        loss = LossOracle(1, lambda w: float(np.exp(w[0])), lambda w: np.array([np.inf]),
                          lambda w: np.array([[1.0]]))
        with pytest.raises(NonFinite):
            ocp_minimize(loss, [0.0], OcpConfig())

    def test_config_validation(self):
        with pytest.raises(ValueError):
            OcpConfig(R_d=-1.0)
        with pytest.raises(ValueError):
            OcpConfig(tol=0.0)
        with pytest.raises(ValueError):
            OcpConfig(max_iters=0)
        with pytest.raises(ValueError):
            OcpConfig(mode="newton")


class TestFixedPointGain:
    def test_newton_equivalence(self):
        rng = np.random.default_rng(2)
        H = random_spd(rng, 3)
        a, b = gain_pair(H, 0.1)
        np.testing.assert_allclose(fixed_point_gain(a, b), np.linalg.inv(H), atol=1e-8)

    def test_singular_truncation_is_finite(self):
        a, b = gain_pair(np.diag([1.0, 0.0]), 1.0)
        S = fixed_point_gain(a, b, max_doublings=4)
        assert S[0, 0] == pytest.approx(1.0 - 2.0**-16)
        assert S[1, 1] == pytest.approx(16.0)

    def test_indefinite_solves_fixed_point(self):
        # beta = diag(2, 0.5): the series diverges, the fixed point is H^-1
        a, b = gain_pair(np.diag([-0.5, 1.0]), 1.0)
        S = fixed_point_gain(a, b)
        np.testing.assert_allclose(S, np.diag([-2.0, 1.0]), atol=1e-12)
        np.testing.assert_allclose(a @ np.ones(2) + b @ (S @ np.ones(2)), S @ np.ones(2), atol=1e-12)


class TestProperties:
    @settings(max_examples=50, deadline=None)
    @given(st.integers(1, 6), st.integers(0, 2**32 - 1), st.sampled_from(["interleaved", "unrolled", "inner_loop"]))
    def test_zero_gradient_gives_zero_steps(self, d, seed, mode):
        rng = np.random.default_rng(seed)
        H = random_spd(rng, d)
        w0 = rng.normal(size=d)
        loss = quadratic_loss(H, b=H @ w0)
        w, tr = ocp_minimize(loss, w0, OcpConfig(mode=mode))
        assert np.array_equal(w, w0)
        assert tr.records[0].step_norm == 0.0

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_psd_never_non_invertible(self, d, seed):
        rng = np.random.default_rng(seed)
        A = rng.normal(size=(d, max(1, d - 1)))
        H = A @ A.T
        loss = quadratic_loss(H, b=H @ rng.normal(size=d))
        ocp_minimize(loss, np.zeros(d), OcpConfig(R_d=0.1, max_iters=50))

    @settings(max_examples=30, deadline=None)
    @given(st.integers(1, 5), st.integers(0, 2**32 - 1))
    def test_hessian_symmetric_and_gradient_matches_fd(self, d, seed):
        rng = np.random.default_rng(seed)
        loss = quadratic_loss(random_spd(rng, d), b=rng.normal(size=d))
        w = rng.normal(size=d)
        H = loss.hessian(w)
        assert np.array_equal(H, H.T)
        eps = 1e-6
        fd = np.array([(loss.value(w + eps * e) - loss.value(w - eps * e)) / (2 * eps) for e in np.eye(d)])
        np.testing.assert_allclose(loss.gradient(w), fd, rtol=1e-5, atol=1e-7)
