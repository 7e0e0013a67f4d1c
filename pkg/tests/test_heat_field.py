from __future__ import annotations

import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from entroflow.heat_field import (
    HeatSolution,
    bochner_residual,
    evaluate_jet,
    f_equation_residual,
    f_equation_residual_from_jet,
    heat_residual,
    key_identity_residual,
    key_identity_terms,
    w_pointwise,
)

FD_STEP = 1e-5


def _richardson(g, h):
    """Central difference with one Richardson extrapolation (error O(h^4))."""
    d1 = (g(h) - g(-h)) / (2 * h)
    d2 = (g(h / 2) - g(-h / 2)) / h
    return (4 * d2 - d1) / 3


def fd_gradient(fun, x, h=FD_STEP):
    out = []
    for i in range(len(x)):
        e = np.zeros(len(x))
        e[i] = 1.0
        out.append(_richardson(lambda s: fun(x + s * e), h))
    return np.array(out)


def _scalar(a) -> float:
    return float(np.atleast_1d(a)[0])


def random_points(rng, d, m=10, box=1.5):
    return rng.uniform(-box, box, (m, d)), rng.uniform(0.2, 1.5, m)


class TestKernel:
    def test_value_at_origin(self, kernel2):
        assert _scalar(kernel2.value(np.zeros(2), 0.25)) == pytest.approx(1 / math.pi, rel=1e-15)

    def test_potential_and_hessian(self, kernel2, rng):
        x = rng.normal(size=(20, 2))
        t = 0.7
        j = evaluate_jet(kernel2, x, t, order=3)
        np.testing.assert_allclose(j.f, np.sum(x * x, 1) / (4 * t), rtol=1e-13, atol=1e-15)
        np.testing.assert_allclose(j.hess_f, np.broadcast_to(np.eye(2) / (2 * t), (20, 2, 2)), atol=1e-14)
        assert np.max(np.abs(j.third_f)) < 1e-13

    def test_unit_mass(self, kernel3):
        assert kernel3.weights.tolist() == [1.0]

    def test_nonpositive_time(self, kernel2):
        with pytest.raises(ValueError):
            evaluate_jet(kernel2, [0.0, 0.0], 0.0)

    def test_rejects_bad_modes(self):
        with pytest.raises(ValueError):
            HeatSolution([-1.0], [[0.0, 0.0]], [0.0])
        with pytest.raises(ValueError):
            HeatSolution([1.0], [[0.0, 0.0]], [-0.1])


class TestJetAgainstFiniteDifferences:
    """Closed-form derivatives vs Richardson-extrapolated central differences."""

    @pytest.mark.parametrize("fixture", ["mixture2", "mixture3"])
    def test_spatial_derivatives(self, fixture, request, rng):
        u = request.getfixturevalue(fixture)
        xs, ts = random_points(rng, u.dim)
        for x, t in zip(xs, ts):
            j = evaluate_jet(u, x, t, order=4)
            g = fd_gradient(lambda y: _scalar(u.value(y, t)), x)
            H = np.array([fd_gradient(lambda y: evaluate_jet(u, y, t, 2).grad_u[0][i], x) for i in range(u.dim)])
            T3 = np.array([[fd_gradient(lambda y: evaluate_jet(u, y, t, 2).hess_u[0][i, k], x)
                            for k in range(u.dim)] for i in range(u.dim)])
            scale = j.u[0]
            np.testing.assert_allclose(j.grad_u[0], g, rtol=1e-6, atol=1e-6 * scale)
            np.testing.assert_allclose(j.hess_u[0], H, rtol=1e-6, atol=1e-6 * scale)
            np.testing.assert_allclose(j.third_u[0], T3, rtol=1e-6, atol=1e-6 * scale)

    def test_time_derivatives(self, mixture2, rng):
        u = mixture2
        xs, ts = random_points(rng, 2)
        for x, t in zip(xs, ts):
            j = evaluate_jet(u, x, t, order=3)
            dtu = _richardson(lambda s: _scalar(u.value(x, t + s)), FD_STEP)
            dtgf = np.array([_richardson(lambda s: evaluate_jet(u, x, t + s, 2).grad_f[0][i], FD_STEP)
                             for i in range(2)])
            dthf = np.array([[_richardson(lambda s: evaluate_jet(u, x, t + s, 2).hess_f[0][i, k], FD_STEP)
                              for k in range(2)] for i in range(2)])
            assert j.dt_u[0] == pytest.approx(dtu, rel=1e-6, abs=1e-9)
            np.testing.assert_allclose(j.dt_grad_f[0], dtgf, rtol=1e-6, atol=1e-8)
            np.testing.assert_allclose(j.dt_hess_f[0], dthf, rtol=1e-6, atol=1e-8)

    def test_fourth_derivatives_of_f(self, mixture2, rng):
        u = mixture2
        xs, ts = random_points(rng, 2, m=5)
        for x, t in zip(xs, ts):
            j = evaluate_jet(u, x, t, order=4)
            F4 = np.array([fd_gradient(lambda y: evaluate_jet(u, y, t, 3).third_f[0][a, b, c], x)
                           for a in range(2) for b in range(2) for c in range(2)]).reshape(2, 2, 2, 2)
            np.testing.assert_allclose(j.fourth_f[0], F4, rtol=1e-6, atol=1e-7)

    def test_w_against_fd_jet(self):
        u = HeatSolution([1.0, 0.5], [[0.0, 0.0], [0.6, -0.3]], [0.0, 0.3])
        x, t = np.zeros(2), 0.5
        f = lambda y: _scalar(u.potential(y, t))  # noqa: E731
        grad = fd_gradient(f, x)
        h = 1e-3
        lap = sum((f(x + h * e) - 2 * f(x) + f(x - h * e)) / h**2 for e in np.eye(2))
        W_fd = t * (2 * lap - grad @ grad) + f(x) - 2
        assert w_pointwise(u, x, t)[0] == pytest.approx(W_fd, abs=1e-6)


class TestIdentities:
    @settings(max_examples=40, deadline=None)
    @given(x=st.lists(st.floats(-3, 3), min_size=2, max_size=2), t=st.floats(0.05, 3.0))
    def test_heat_residual(self, x, t):
        u = HeatSolution([1.0, 0.6, 0.4], [[0.0, 0.0], [0.4, -0.2], [-0.3, 0.35]], [0.0, 0.2, 0.5])
        j = evaluate_jet(u, x, t, order=2)
        scale = max(abs(j.dt_u_over_u[0]), abs(j.lap_u_over_u[0]), 1.0)
        assert abs(heat_residual(u, x, t)[0]) <= 1e-12 * scale

    def test_f_equation_kernel(self, kernel2, rng):
        xs, ts = random_points(rng, 2, m=50)
        for x, t in zip(xs, ts):
            assert abs(f_equation_residual(kernel2, x, t)[0]) <= 1e-12

    def test_f_equation_mixture_example(self, mixture2):
        assert abs(f_equation_residual(mixture2, [0.3, -0.2], 0.7)[0]) <= 1e-10

    def test_corrupted_solution_detected(self, mixture2):
        """Negative control: perturbing a weight between the time and space parts breaks the equation."""
        x, t = np.array([0.3, -0.2]), 0.7
        good = evaluate_jet(mixture2, x, t, order=3)
        bad_u = HeatSolution(mixture2.weights * np.array([1.0, 1.3, 1.0]), mixture2.centers, mixture2.offsets)
        bad = evaluate_jet(bad_u, x, t, order=3)
        mixed = type(good)(good.t, good.dim, good.log_u, good.p1, good.p2, good.p3, good.p4,
                           bad.dt_u_over_u, bad.dt_p1, bad.dt_p2)
        assert abs(f_equation_residual_from_jet(mixed)[0]) > 1e-4

    def test_w_kernel_vanishes_and_shifts(self, rng):
        xs, ts = random_points(rng, 2, m=20)
        for x, t in zip(xs, ts):
            assert abs(w_pointwise(HeatSolution.kernel(2), x, t)[0]) < 1e-13
            a = 0.37
            assert w_pointwise(HeatSolution.kernel(2, weight=a), x, t)[0] == pytest.approx(-math.log(a), abs=1e-13)

    def test_key_identity_kernel(self, kernel2, rng):
        xs, ts = random_points(rng, 2, m=30)
        for x, t in zip(xs, ts):
            j = evaluate_jet(kernel2, x, t, order=4)
            lhs, rhs = key_identity_terms(j)
            assert abs(lhs[0]) <= 1e-11 and abs(rhs[0]) <= 1e-11
            assert abs(key_identity_residual(kernel2, x, t)[0]) <= 1e-11

    @pytest.mark.parametrize("fixture", ["mixture2", "mixture3"])
    def test_key_identity_mixture(self, fixture, request):
        u = request.getfixturevalue(fixture)
        rng = np.random.default_rng(7)
        xs = rng.uniform(-2, 2, (100, u.dim))
        ts = rng.uniform(0.1, 2.0, 100)
        for x, t in zip(xs, ts):
            lhs, rhs = key_identity_terms(evaluate_jet(u, x, t, order=4))
            assert abs(lhs[0] - rhs[0]) <= 1e-9 * max(abs(rhs[0]), 1e-12)
            assert abs(bochner_residual(u, x, t)[0]) <= 1e-11

    def test_key_identity_fd_cross_check(self, mixture2):
        """(d_t - Lap)(W u) by finite differences of W u itself, on 10 samples."""
        u = mixture2
        rng = np.random.default_rng(3)
        Wu = lambda y, s: w_pointwise(u, y, s)[0] * _scalar(u.value(y, s))  # noqa: E731
        h = 2e-3
        for x, t in zip(rng.uniform(-1.5, 1.5, (10, 2)), rng.uniform(0.3, 1.5, 10)):
            dt = _richardson(lambda s: Wu(x, t + s), h)
            lap = 0.0
            for e in np.eye(2):
                # 4th-order second difference
                lap += (-Wu(x + 2 * h * e, t) + 16 * Wu(x + h * e, t) - 30 * Wu(x, t)
                        + 16 * Wu(x - h * e, t) - Wu(x - 2 * h * e, t)) / (12 * h**2)
            j = evaluate_jet(u, x, t, order=4)
            _, rhs = key_identity_terms(j)
            assert dt - lap == pytest.approx(rhs[0] * j.u[0], rel=1e-5, abs=1e-8)


class TestStructure:
    def test_translation_equivariance(self, mixture2, rng):
        v = np.array([0.7, -1.1])
        x = rng.normal(size=(15, 2))
        a = evaluate_jet(mixture2, x, 0.8, order=3)
        b = evaluate_jet(mixture2.translated(v), x + v, 0.8, order=3)
        np.testing.assert_allclose(b.f, a.f, rtol=1e-12)
        np.testing.assert_allclose(b.grad_f, a.grad_f, rtol=1e-10, atol=1e-13)
        np.testing.assert_allclose(b.hess_f, a.hess_f, rtol=1e-10, atol=1e-13)

    def test_far_field_is_finite(self, mixture2):
        t = 0.3
        x = np.array([[40 * math.sqrt(2 * t), 0.0], [0.0, -45.0]])
        j = evaluate_jet(mixture2, x, t, order=4)
        assert np.all(np.isfinite(j.f)) and np.all(np.isfinite(j.grad_f)) and np.all(np.isfinite(j.fourth_f))
        assert np.all(j.log_u > -np.inf)

    def test_laplacian_consistency(self, mixture3, rng):
        x = rng.normal(size=(25, 3))
        j = evaluate_jet(mixture3, x, 0.6, order=2)
        np.testing.assert_allclose(j.lap_f, -j.lap_u_over_u + j.grad_f_sq, rtol=1e-13, atol=1e-13)

    def test_records_round_trip(self, mixture3):
        again = HeatSolution.from_records(mixture3.to_records())
        np.testing.assert_array_equal(again.weights, mixture3.weights)
        np.testing.assert_array_equal(again.centers, mixture3.centers)
        np.testing.assert_array_equal(again.offsets, mixture3.offsets)
