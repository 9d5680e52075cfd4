"""Checker and smoothing behavior on known objectives."""

import numpy as np
import pytest

from drsubmax import (DRFunction, LinearFunction, QuadraticFunction, SumFunction,
                      dr_check, grad_check, smoothed_value_and_gradient, smoothing_radius,
                      two_vertex_revenue)


class ConvexBowl(DRFunction):
    """||x||^2: positive Hessian, so the DR checks must flag it."""

    def __init__(self, n):
        super().__init__(n)

    def value(self, x):
        x = np.asarray(x)
        return float(x @ x)

    def gradient(self, x):
        return 2.0 * np.asarray(x, dtype=float)


class TestDrCheck:
    def test_revenue_passes(self):
        report = dr_check(two_vertex_revenue(0.5), 1000, np.random.default_rng(0))
        assert report.passed
        assert report.value_violation <= 1e-8

    def test_convex_function_fails_with_witness(self):
        report = dr_check(ConvexBowl(3), 500, np.random.default_rng(1))
        assert not report.passed
        assert report.value_violation > 0
        x, y, i, alpha = report.witness
        fn = ConvexBowl(3)
        e = np.zeros(3)
        e[i] = alpha
        gap = (fn.value(x + e) - fn.value(x)) - (fn.value(y + e) - fn.value(y))
        assert gap == pytest.approx(report.value_violation)

    def test_linear_violation_exactly_zero(self):
        report = dr_check(LinearFunction(np.array([1.0, -2.0])), 300, np.random.default_rng(2))
        assert report.value_violation <= 1e-12
        assert report.gradient_violation <= 1e-12


class TestGradCheck:
    def test_linear_machine_precision(self):
        fn = LinearFunction(np.array([0.3, -1.2, 2.0]))
        assert grad_check(fn, np.full(3, 0.5)) < 1e-9

    def test_quadratic_tight(self):
        rng = np.random.default_rng(3)
        quad = -np.abs(rng.normal(size=(4, 4)))
        quad = (quad + quad.T) / 2
        fn = QuadraticFunction(quad, rng.uniform(0, 1, 4), 20.0)
        assert grad_check(fn, rng.uniform(0.2, 0.8, 4)) <= 1e-6

    def test_revenue_gradient_at_origin(self):
        fn = two_vertex_revenue(0.5)
        np.testing.assert_allclose(fn.gradient(np.zeros(2)), np.log(2.0), rtol=1e-12)
        # finite differences agree near the origin
        assert grad_check(fn, np.array([0.01, 0.01])) < 1e-7

    def test_h_range_enforced(self):
        with pytest.raises(ValueError):
            grad_check(LinearFunction(np.ones(2)), np.full(2, 0.5), h=1e-2)


class TestSmoothing:
    def test_radius_rule(self):
        assert smoothing_radius(10000) == pytest.approx(0.01)

    def test_linear_unbiased(self):
        fn = LinearFunction(np.array([1.0, 2.0]), offset=3.0)
        x = np.full(2, 0.5)
        val, _ = smoothed_value_and_gradient(fn, x, 0.1, 4000, np.random.default_rng(4))
        # smoothing a linear function has zero bias
        assert val == pytest.approx(fn.value(x), abs=0.02)

    def test_constant_gradient_mean_near_zero(self):
        fn = LinearFunction(np.zeros(3), offset=2.0)
        x = np.full(3, 0.5)
        _, grad = smoothed_value_and_gradient(fn, x, 0.1, 20000, np.random.default_rng(5))
        assert np.max(np.abs(grad)) < 0.2

    def test_linear_gradient_estimate(self):
        w = np.array([1.0, -0.5])
        fn = LinearFunction(w, offset=2.0)
        _, grad = smoothed_value_and_gradient(fn, np.full(2, 0.5), 0.1, 60000,
                                              np.random.default_rng(6))
        np.testing.assert_allclose(grad, w, atol=0.1)

    def test_boundary_rejected(self):
        fn = LinearFunction(np.ones(2))
        with pytest.raises(ValueError):
            smoothed_value_and_gradient(fn, np.array([0.05, 0.5]), 0.1, 10,
                                        np.random.default_rng(7))


class TestSumFunction:
    def test_generic_sum_values_and_grads(self):
        rng = np.random.default_rng(8)
        a = LinearFunction(rng.uniform(0, 1, 3))
        b = two_vertex_revenue(0.3)
        with pytest.raises(ValueError):
            SumFunction([a, b])  # dimension mismatch
        c = LinearFunction(rng.uniform(0, 1, 2))
        s = b + c
        x = rng.uniform(0, 1, 2)
        assert s.value(x) == pytest.approx(b.value(x) + c.value(x))
        np.testing.assert_allclose(s.gradient(x), b.gradient(x) + c.gradient(x))

    def test_stochastic_gradient_unbiased(self):
        fn = LinearFunction(np.array([1.0, 2.0]))
        fn.noise_std = 0.5
        rng = np.random.default_rng(9)
        draws = np.stack([fn.stochastic_gradient(np.full(2, 0.5), rng) for _ in range(5000)])
        np.testing.assert_allclose(draws.mean(axis=0), [1.0, 2.0], atol=0.05)
