"""Bound library for the successive convex inner approximations.

Every constructor takes the previous-iterate expansion point and returns a
small object exposing raw coefficients (for assembling solver programs)
plus an ``evaluate`` method.  Tangent bounds touch the true function at the
expansion point and dominate it one-sidedly everywhere they are used;
these two properties are what make an iteration maximize a true lower
bound, and both are asserted directly in the test suite.

Complex-vector bounds treat the phase vector as the optimization variable;
linear terms appear as Re{grad^H s}, which in stacked real coordinates
[Re s; Im s] is the inner product with [Re grad; Im grad].
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

LN2 = math.log(2.0)


class InvalidEpsilonError(ValueError):
    """Young-inequality weight too small to keep the quadratic term positive."""


@dataclass(frozen=True)
class AffineInPower:
    """value(p) = const + coeffs @ p."""

    const: float
    coeffs: np.ndarray

    def evaluate(self, p) -> float:
        return self.const + float(self.coeffs @ np.asarray(p, float))


def log_sum_upper(p_point: np.ndarray, weights: np.ndarray, sigma2: float) -> AffineInPower:
    """Tangent upper bound of p -> log2(sigma2 + weights @ p), valid for all p.

    The function is concave in p, so its first-order expansion at
    ``p_point`` dominates it globally and touches at the point.
    """
    p_point = np.asarray(p_point, float)
    weights = np.asarray(weights, float)
    level = sigma2 + float(weights @ p_point)
    slope = weights / (LN2 * level)
    return AffineInPower(const=math.log2(level) - float(slope @ p_point), coeffs=slope)


@dataclass(frozen=True)
class QuadOverLinLower:
    """Tangent lower bound of (s, rho) -> |t^H s|^2 / rho (jointly convex, rho > 0).

    value(s, rho) = const + Re{grad_s^H s} + coeff_rho * rho.
    """

    grad_s: np.ndarray
    coeff_rho: float
    const: float

    def evaluate(self, s, rho) -> float:
        return self.const + float(np.real(np.vdot(self.grad_s, s))) + self.coeff_rho * rho


def quad_over_lin_lower(t: np.ndarray, s_point: np.ndarray, rho_point: float) -> QuadOverLinLower:
    if rho_point <= 0:
        raise ValueError("expansion denominator must be positive")
    w = complex(np.vdot(t, s_point))  # t^H s at the point
    power = abs(w) ** 2
    # Expansion constants cancel: value = (2/rho0) Re{w* t^H s} - (power/rho0^2) rho.
    return QuadOverLinLower(
        grad_s=2.0 * w * t / rho_point,
        coeff_rho=-power / rho_point**2,
        const=0.0,
    )


@dataclass(frozen=True)
class BilinearLower:
    """Global lower bound of (x, y) -> x * y, tight whenever x + y = x0 + y0.

    value = half_sum * (x + y) - half_sum^2 - (x - y)^2 / 4 with
    half_sum = (x0 + y0) / 2.
    """

    half_sum: float

    def evaluate(self, x, y) -> float:
        return self.half_sum * (x + y) - self.half_sum**2 - 0.25 * (x - y) ** 2


def bilinear_lower(x_point: float, y_point: float) -> BilinearLower:
    return BilinearLower(half_sum=0.5 * (x_point + y_point))


@dataclass(frozen=True)
class AbsSquareLower:
    """Tangent lower bound of s -> |c + t^H s|^2 (convex in s).

    value(s) = const + Re{grad^H s}; touches at the expansion point and
    under-estimates everywhere.
    """

    grad: np.ndarray
    const: float

    def evaluate(self, s) -> float:
        return self.const + float(np.real(np.vdot(self.grad, s)))


def abs_square_lower(c: complex, t: np.ndarray, s_point: np.ndarray) -> AbsSquareLower:
    w = c + complex(np.vdot(t, s_point))
    return AbsSquareLower(
        grad=2.0 * w * t,
        const=2.0 * (w.conjugate() * c).real - abs(w) ** 2,
    )


@dataclass(frozen=True)
class Exp2Lower:
    """Tangent lower bound of x -> 2^x: value = level * (1 + ln2 (x - x0))."""

    x_point: float
    level: float

    def evaluate(self, x) -> float:
        return self.level * (1.0 + LN2 * (x - self.x_point))


def exp2_lower(x_point: float) -> Exp2Lower:
    return Exp2Lower(x_point=x_point, level=2.0**x_point)


@dataclass(frozen=True)
class Exp2QuadUpper:
    """Quadratic upper bound of x -> 2^x, valid for all x <= x0 + delta.

    value = level * (1 + ln2 u + curve (ln2 u)^2), u = x - x0.  The
    remainder factor (e^v - 1 - v) / v^2 is increasing, so capping it at
    v = delta ln2 dominates 2^x on the whole half-line below the cap while
    staying tangent at the point.  Used to push exponential rate
    constraints into the quadratic cone toolbox, paired with the trust
    bound x <= x0 + delta.
    """

    x_point: float
    level: float
    curve: float
    delta: float

    def evaluate(self, x) -> float:
        u = x - self.x_point
        return self.level * (1.0 + LN2 * u + self.curve * (LN2 * u) ** 2)


def exp2_quad_upper(x_point: float, delta: float) -> Exp2QuadUpper:
    if delta <= 0:
        raise ValueError("trust width must be positive")
    v = delta * LN2
    curve = (math.exp(v) - 1.0 - v) / v**2
    return Exp2QuadUpper(x_point=x_point, level=2.0**x_point, curve=curve, delta=delta)


@dataclass(frozen=True)
class AgmUpper:
    """Convex upper bound of (a, b) -> a b for a, b >= 0, tight on the
    expansion ray b / a = b0 / a0: value = (coef_a2 a^2 + coef_b2 b^2)."""

    coef_a2: float
    coef_b2: float

    def evaluate(self, a, b) -> float:
        return self.coef_a2 * a * a + self.coef_b2 * b * b


def agm_upper(a_point: float, b_point: float) -> AgmUpper:
    if a_point <= 0 or b_point <= 0:
        raise ValueError("expansion point must be positive")
    return AgmUpper(coef_a2=0.5 * b_point / a_point, coef_b2=0.5 * a_point / b_point)


@dataclass(frozen=True)
class InverseAffineLower:
    """Tangent lower bound of y -> 1/y on y > 0: value = 2/y0 - y/y0^2."""

    y_point: float

    def evaluate(self, y) -> float:
        return 2.0 / self.y_point - y / self.y_point**2


def inverse_affine_lower(y_point: float) -> InverseAffineLower:
    if y_point <= 0:
        raise ValueError("expansion point must be positive")
    return InverseAffineLower(y_point=y_point)


def harvested_power_floor(u_const: float, s_quad: float, t_cross: float, epsilon: float):
    """Quadratic floor of x -> u + s x^2 + 2 t x as (offset, curvature).

    Young's inequality 2 t x >= -eps t^2 - x^2 / eps gives
    u + s x^2 + 2 t x >= (u - eps t^2) + (s - 1/eps) x^2 for every real x;
    ``epsilon`` must exceed 1/s so the residual curvature stays positive.
    """
    if s_quad <= 0:
        raise InvalidEpsilonError("quadratic coefficient must be positive")
    if epsilon <= 1.0 / s_quad:
        raise InvalidEpsilonError(
            f"epsilon {epsilon} must exceed 1/s = {1.0 / s_quad} for a positive floor"
        )
    return u_const - epsilon * t_cross**2, s_quad - 1.0 / epsilon


def power_quad_upper(m_point: float, alpha: float, delta_rel: float):
    """Quadratic upper bound of m -> m^alpha around m0, alpha >= 2.

    Returns (c0, c1, c2) with m^alpha <= c0 + c1 (m - m0) + c2 (m - m0)^2
    for all 0 <= m <= m0 (1 + delta_rel); the second derivative of m^alpha
    is nondecreasing, so capping it at the right edge dominates the whole
    interval while keeping tangency at m0.
    """
    if m_point <= 0 or delta_rel <= 0:
        raise ValueError("expansion point and trust width must be positive")
    hi = m_point * (1.0 + delta_rel)
    return (
        m_point**alpha,
        alpha * m_point ** (alpha - 1.0),
        0.5 * alpha * (alpha - 1.0) * hi ** (alpha - 2.0),
    )


def real_stack(vec: np.ndarray) -> np.ndarray:
    """[Re v; Im v] coordinates for Re{v^H s} inner products."""
    return np.concatenate([vec.real, vec.imag])


def hermitian_real_form(t_outer: np.ndarray) -> np.ndarray:
    """Real symmetric R with s^H T s = x^T R x for Hermitian T, x = [Re s; Im s]."""
    return np.block(
        [[t_outer.real, -t_outer.imag], [t_outer.imag, t_outer.real]]
    )
