"""Surrogate bounds: tangency at the expansion point and one-sided dominance."""

import math

import numpy as np
import pytest

from wcsee_lab.channels import RngStream
from wcsee_lab.sca.surrogates import (
    InvalidEpsilonError,
    abs_square_lower,
    agm_upper,
    bilinear_lower,
    exp2_lower,
    exp2_quad_upper,
    harvested_power_floor,
    hermitian_real_form,
    inverse_affine_lower,
    log_sum_upper,
    power_quad_upper,
    quad_over_lin_lower,
    real_stack,
)

TANGENCY = 1e-9
SAMPLES = 1000


class TestLogSumUpper:
    def true_value(self, p, w, sigma2):
        return math.log2(sigma2 + float(w @ p))

    def test_tangent_at_point(self):
        rng = RngStream(0).generator
        p0 = rng.uniform(0.0, 0.1, 4)
        w = rng.uniform(0.0, 2.0, 4)
        bound = log_sum_upper(p0, w, 1e-3)
        assert abs(bound.evaluate(p0) - self.true_value(p0, w, 1e-3)) <= TANGENCY

    def test_dominates_everywhere(self):
        rng = RngStream(1).generator
        p0 = rng.uniform(0.0, 0.1, 4)
        w = rng.uniform(0.0, 2.0, 4)
        bound = log_sum_upper(p0, w, 1e-3)
        for _ in range(SAMPLES):
            p = rng.uniform(0.0, 1.0, 4)
            assert bound.evaluate(p) >= self.true_value(p, w, 1e-3) - 1e-12

    def test_zero_weights_reduce_to_noise_floor(self):
        bound = log_sum_upper(np.ones(3), np.zeros(3), 1e-3)
        assert bound.evaluate(np.ones(3) * 7.0) == pytest.approx(math.log2(1e-3), abs=1e-12)


class TestQuadOverLin:
    def test_tangent_and_dominated(self):
        rng = RngStream(2)
        t = rng.complex_normal(6)
        s0 = np.exp(1j * rng.uniform(0, 2 * math.pi, 6))
        rho0 = 0.7
        bound = quad_over_lin_lower(t, s0, rho0)
        true0 = abs(np.vdot(t, s0)) ** 2 / rho0
        assert abs(bound.evaluate(s0, rho0) - true0) <= TANGENCY * max(1, true0)
        g = rng.generator
        for _ in range(SAMPLES):
            s = rng.complex_normal(6)
            rho = g.uniform(0.01, 5.0)
            true = abs(np.vdot(t, s)) ** 2 / rho
            assert bound.evaluate(s, rho) <= true + 1e-9 * max(1.0, true)

    def test_zero_channel_is_identically_zero(self):
        bound = quad_over_lin_lower(np.zeros(4, complex), np.ones(4, complex), 1.0)
        assert bound.evaluate(np.ones(4, complex) * 3.0, 0.2) == 0.0


class TestBilinearLower:
    def test_tangent_at_point(self):
        bound = bilinear_lower(1.3, -0.4)
        assert abs(bound.evaluate(1.3, -0.4) - 1.3 * -0.4) <= TANGENCY

    def test_tight_along_the_constant_sum_line(self):
        bound = bilinear_lower(2.0, 3.0)
        for x in np.linspace(-3, 6, 20):
            y = 5.0 - x
            assert abs(bound.evaluate(x, y) - x * y) <= 1e-10

    def test_dominated_everywhere(self):
        rng = RngStream(3).generator
        for _ in range(SAMPLES):
            x0, y0, x, y = rng.uniform(-4, 4, 4)
            assert bilinear_lower(x0, y0).evaluate(x, y) <= x * y + 1e-10

    def test_zero_sum_point_reduces_to_negative_square(self):
        bound = bilinear_lower(1.5, -1.5)
        x, y = 2.0, 0.5
        assert bound.evaluate(x, y) == pytest.approx(-0.25 * (x - y) ** 2, abs=1e-12)


class TestAbsSquareLower:
    def test_tangent_at_point(self):
        rng = RngStream(4)
        c = complex(*rng.standard_normal(2))
        t = rng.complex_normal(5)
        s0 = np.exp(1j * rng.uniform(0, 2 * math.pi, 5))
        bound = abs_square_lower(c, t, s0)
        true0 = abs(c + np.vdot(t, s0)) ** 2
        assert abs(bound.evaluate(s0) - true0) <= TANGENCY * max(1.0, true0)

    def test_dominated_on_the_unit_polydisk(self):
        rng = RngStream(5)
        c = 0.3 - 0.8j
        t = rng.complex_normal(5)
        s0 = np.exp(1j * rng.uniform(0, 2 * math.pi, 5))
        bound = abs_square_lower(c, t, s0)
        g = rng.generator
        for _ in range(SAMPLES):
            radii = g.uniform(0, 1, 5)
            s = radii * np.exp(1j * g.uniform(0, 2 * math.pi, 5))
            true = abs(c + np.vdot(t, s)) ** 2
            assert bound.evaluate(s) <= true + 1e-10

    def test_constant_case_touches_only_when_it_should(self):
        # t = 0: the bound degenerates to the constant |c|^2, matching the
        # (constant) true function exactly.
        c = 1.0 + 2.0j
        bound = abs_square_lower(c, np.zeros(3, complex), np.ones(3, complex))
        assert bound.evaluate(np.zeros(3, complex)) == pytest.approx(abs(c) ** 2, abs=1e-12)


class TestExp2Lower:
    def test_tangent(self):
        bound = exp2_lower(1.7)
        assert abs(bound.evaluate(1.7) - 2**1.7) <= TANGENCY

    def test_under_bound_on_grid(self):
        bound = exp2_lower(0.9)
        for x in np.linspace(0.9 - 5, 0.9 + 5, SAMPLES):
            assert bound.evaluate(x) <= 2**x + 1e-12

    def test_classic_inequality_at_zero(self):
        bound = exp2_lower(0.0)
        for x in np.linspace(-4, 4, 101):
            assert bound.evaluate(x) == pytest.approx(1.0 + x * math.log(2), abs=1e-12)
            assert bound.evaluate(x) <= 2**x + 1e-12


class TestExp2QuadUpper:
    def test_tangent_and_dominates_below_cap(self):
        bound = exp2_quad_upper(1.2, delta=2.0)
        assert abs(bound.evaluate(1.2) - 2**1.2) <= TANGENCY
        for x in np.linspace(1.2 - 12.0, 1.2 + 2.0, SAMPLES):
            assert bound.evaluate(x) >= 2**x - 1e-10


class TestAgmUpper:
    def test_tangent_at_point_and_on_ray(self):
        bound = agm_upper(2.0, 5.0)
        assert abs(bound.evaluate(2.0, 5.0) - 10.0) <= TANGENCY
        for scale in (0.3, 1.7, 4.0):
            a, b = 2.0 * scale, 5.0 * scale
            assert abs(bound.evaluate(a, b) - a * b) <= 1e-9

    def test_dominates_nonnegative_quadrant(self):
        rng = RngStream(6).generator
        for _ in range(SAMPLES):
            a0, b0 = rng.uniform(0.1, 5.0, 2)
            a, b = rng.uniform(0.0, 5.0, 2)
            assert agm_upper(a0, b0).evaluate(a, b) >= a * b - 1e-10

    def test_equal_point_is_tight_on_diagonal(self):
        bound = agm_upper(3.0, 3.0)
        for v in np.linspace(0, 10, 50):
            assert abs(bound.evaluate(v, v) - v * v) <= 1e-10


class TestInverseAffineLower:
    def test_tangent(self):
        bound = inverse_affine_lower(2.5)
        assert abs(bound.evaluate(2.5) - 0.4) <= TANGENCY

    def test_dominated_on_positive_axis(self):
        bound = inverse_affine_lower(1.8)
        for y in np.linspace(1e-3, 18.0, SAMPLES):
            assert bound.evaluate(y) <= 1.0 / y + 1e-12

    def test_unit_point_classic_form(self):
        bound = inverse_affine_lower(1.0)
        for y in np.linspace(0.05, 5, 40):
            assert bound.evaluate(y) == pytest.approx(2.0 - y, abs=1e-12)


class TestHarvestedPowerFloor:
    def test_zero_cross_term(self):
        offset, curvature = harvested_power_floor(1.0, 2.0, 0.0, 1.0)
        assert (offset, curvature) == (1.0, 1.0)

    def test_the_stable_epsilon_choice(self):
        u, s, t = 0.4, 3.0, -0.7
        offset, curvature = harvested_power_floor(u, s, t, 2.0 / s)
        assert curvature == pytest.approx(s / 2.0, abs=1e-12)
        assert offset == pytest.approx(u - 2.0 * t * t / s, abs=1e-12)

    def test_dominated_for_all_real_x(self):
        rng = RngStream(7).generator
        for _ in range(SAMPLES):
            u, s, t = rng.uniform(0.1, 3.0), rng.uniform(0.5, 4.0), rng.uniform(-2, 2)
            offset, curvature = harvested_power_floor(u, s, t, 2.0 / s)
            x = rng.uniform(-5, 5)
            true = u + s * x * x + 2 * t * x
            assert offset + curvature * x * x <= true + 1e-10

    def test_rejects_small_epsilon(self):
        with pytest.raises(InvalidEpsilonError):
            harvested_power_floor(1.0, 2.0, 0.5, 0.4)


class TestPowerQuadUpper:
    def test_tangent_and_dominates_interval(self):
        c0, c1, c2 = power_quad_upper(4.0, 2.5, 0.5)
        assert abs(c0 - 4.0**2.5) <= TANGENCY
        for m in np.linspace(1e-6, 6.0, SAMPLES):
            val = c0 + c1 * (m - 4.0) + c2 * (m - 4.0) ** 2
            assert val >= m**2.5 - 1e-9


class TestRealStacking:
    def test_inner_product_identity(self):
        rng = RngStream(8)
        g = rng.complex_normal(5)
        s = rng.complex_normal(5)
        assert np.real(np.vdot(g, s)) == pytest.approx(
            float(real_stack(g) @ real_stack(s)), abs=1e-12
        )

    def test_quadratic_form_identity(self):
        rng = RngStream(9)
        t = rng.complex_normal(4)
        outer = np.outer(t, t.conj())
        s = rng.complex_normal(4)
        x = real_stack(s)
        quad = float(x @ hermitian_real_form(outer) @ x)
        assert quad == pytest.approx(float(np.real(s.conj() @ outer @ s)), abs=1e-10)
