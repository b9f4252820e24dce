"""Hover-position optimization by convex inner approximations.

For fixed beams, powers, and phases, moves the platform to maximize the
minimum user rate of the frozen-fading model, in which only the product of
the two hop distances varies with position.  Maximizing the minimum SINR
is the same problem through the monotone log map, so the subproblems carry
the SINR directly and the rate appears only in reporting.

Per iteration, around the incumbent position:

* distance products are upper-bounded by the ratio-preserving convex mean
  of the squared hop distances (tight at the incumbent) and routed through
  slack products m <= y^(1/alpha) via a trust-capped quadratic majorizer
  of m^alpha;
* the SINR-slack x noise-slack product is upper-bounded the same convex-
  mean way;
* the harvest floor uses the quadratic floor of the received power in the
  path-loss factor plus the tangent floor of 1/y, both global.

Slack variables are normalized by their incumbent values so the solver
sees order-one data regardless of the distance scale.  Candidates are
certified against exact model values; on a dip the trust width shrinks and
the solve is retried before the block stops.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from ..convex import ConvexProgram
from ..geometry import Position2D, UavRegion
from .coeffs import (
    PlacementGains,
    hop_distances,
    placement_harvested,
    placement_user_sinr,
)
from .power import TraceRow
from .surrogates import harvested_power_floor, power_quad_upper


@dataclass
class UavResult:
    q: Position2D
    zeta: float  # min user rate of the frozen-fading model at exit
    min_sinr: float
    eh_value: float
    eh_ok: bool
    iterations: int
    trace: list[TraceRow] = field(default_factory=list)


def min_rate(gains: PlacementGains, q: Position2D, sigma2: float) -> float:
    return float(np.log2(1.0 + placement_user_sinr(gains, q, sigma2).min()))


def uav_location_sca(
    gains: PlacementGains,
    sigma2: float,
    region: UavRegion,
    q_init: Position2D,
    eh_required: float = 0.0,
    tol: float = 0.01,
    max_iter: int = 50,
    trust: float = 0.5,
) -> UavResult:
    """Iterate convex placement solves from ``q_init`` (must lie in the region)."""
    if not region.contains(q_init, tol=1e-9):
        raise ValueError("initial position must lie inside the hover region")
    q = q_init
    zeta = min_rate(gains, q, sigma2)
    trace: list[TraceRow] = []
    it = 0
    for _ in range(max_iter):
        it += 1
        accepted = None
        local_trust = trust
        for _ in range(3):
            candidate = _solve_placement_subproblem(
                gains, sigma2, region, q, eh_required, local_trust
            )
            if candidate is not None:
                zeta_new = min_rate(gains, candidate, sigma2)
                eh_new = (
                    float(np.sum(placement_harvested(gains, candidate)))
                    if eh_required > 0.0
                    else 0.0
                )
                improves = zeta_new >= zeta - 1e-9 * max(1.0, abs(zeta))
                feasible = eh_required <= 0.0 or eh_new >= eh_required * (1.0 - 1e-9)
                if improves and feasible:
                    accepted = (candidate, zeta_new)
                    break
            local_trust /= 4.0
        if accepted is None:
            break
        q_new, zeta_new = accepted
        movement = math.hypot(q_new.x - q.x, q_new.y - q.y)
        trace.append(
            TraceRow(
                block="position",
                iteration=it,
                objective=zeta_new,
                lam=0.0,
                residual=abs(zeta_new - zeta),
            )
        )
        converged = abs(zeta_new - zeta) <= tol and movement <= 1e-3
        q, zeta = q_new, zeta_new
        if converged:
            break
    eh_value = (
        float(np.sum(placement_harvested(gains, q))) if gains.c_eve.size else 0.0
    )
    sinrs = placement_user_sinr(gains, q, sigma2)
    return UavResult(
        q=q,
        zeta=zeta,
        min_sinr=float(sinrs.min()),
        eh_value=eh_value,
        eh_ok=eh_value >= eh_required - 1e-12,
        iterations=it,
        trace=trace,
    )


def _solve_placement_subproblem(gains, sigma2, region, q_point, eh_required, trust):
    """One convex solve around ``q_point``; returns the candidate position."""
    k_users = gains.a_quad.shape[0]
    j_eves = gains.c_eve.shape[0] if eh_required > 0.0 else 0
    alpha = gains.alpha

    d_b0, d_users0, d_eves0 = hop_distances(gains, q_point)
    m_users0 = d_users0 * d_b0
    y_users0 = m_users0**alpha
    sinr0 = placement_user_sinr(gains, q_point, sigma2)
    rho0 = np.maximum(sinr0 * (1.0 - 1e-9), 1e-15)
    m_eves0 = d_eves0 * d_b0
    y_eves0 = m_eves0**alpha

    # Layout: [qx, qy, t, rho' (K), y' (K), m' (K), y_e' (J), m_e' (J)];
    # primed slacks are normalized by their incumbent values.
    n = 3 + 3 * k_users + 2 * j_eves
    i_t = 2
    i_rho = 3
    i_y = i_rho + k_users
    i_m = i_y + k_users
    i_ye = i_m + k_users
    i_me = i_ye + j_eves

    prog = ConvexProgram(n)
    objective = np.zeros(n)
    objective[i_t] = -1.0
    prog.set_linear_objective(objective)

    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[i_t] = 0.0
    lb[i_rho : i_rho + k_users] = 0.0
    lb[i_y : i_y + k_users] = 1e-3
    lb[i_ye : i_ye + j_eves] = 1e-3
    kappa = 0.5 * alpha * (alpha - 1.0) * (1.0 + trust) ** (alpha - 2.0)
    for idx, m0_arr, count in ((i_m, m_users0, k_users), (i_me, m_eves0, j_eves)):
        for i in range(count):
            floor_m = max(1e-6, gains.altitude**2 / m0_arr[i])
            lb[idx + i] = floor_m
            ub[idx + i] = 1.0 + trust
    # Hover region: boxes for proper spans, equalities for collapsed axes.
    for axis, lo, hi in ((0, region.x_min, region.x_max), (1, region.y_min, region.y_max)):
        if hi - lo > 1e-12:
            lb[axis], ub[axis] = lo, hi
        else:
            row = np.zeros(n)
            row[axis] = 1.0
            prog.add_equality(row, lo)
    prog.add_box(lb=lb, ub=ub)

    def add_distance_product_rows(idx_m, m0, d_far0, w_far):
        """Convex-mean bound of d(q) d_b(q) <= m0 m', tight at the incumbent."""
        p_mat = np.zeros((n, n))
        ca = 0.5 * d_b0 / d_far0  # multiplies d_far(q)^2
        cb = 0.5 * d_far0 / d_b0  # multiplies d_b(q)^2
        p_mat[0, 0] = 2.0 * (ca + cb)
        p_mat[1, 1] = 2.0 * (ca + cb)
        q_vec = np.zeros(n)
        q_vec[0] = -2.0 * (ca * w_far.x + cb * gains.bs_pos.x)
        q_vec[1] = -2.0 * (ca * w_far.y + cb * gains.bs_pos.y)
        q_vec[idx_m] = -m0
        const = (
            ca * (w_far.x**2 + w_far.y**2 + gains.altitude**2)
            + cb * (gains.bs_pos.x**2 + gains.bs_pos.y**2 + gains.altitude**2)
        )
        prog.add_quadratic(p_mat, q_vec, const)

    def add_power_link_row(idx_m, idx_y, m0, y0):
        """Trust-capped majorizer of (m0 m')^alpha <= y0 y'."""
        c0, c1, c2 = power_quad_upper(1.0, alpha, trust)
        scale = m0**alpha / y0
        p_mat = np.zeros((n, n))
        p_mat[idx_m, idx_m] = 2.0 * c2 * scale
        q_vec = np.zeros(n)
        q_vec[idx_m] = (c1 - 2.0 * c2) * scale
        q_vec[idx_y] = -1.0
        const = (c0 - c1 + c2) * scale
        prog.add_quadratic(p_mat, q_vec, const)

    for k in range(k_users):
        # Objective epigraph: t below every user's SINR slack.
        row = np.zeros(n)
        row[i_t] = 1.0
        row[i_rho + k] = -rho0[k]
        prog.add_linear(row, 0.0)

        # SINR certificate: rho (interference + sigma2 y) <= signal, with
        # the rho * y product upper-bounded by the ratio-preserving
        # convex mean (both coordinates are 1 at the incumbent).
        interference = float(np.sum(gains.a_quad[k])) - gains.a_quad[k, k]
        cross = 0.5 * sigma2 * rho0[k] * y_users0[k]
        p_mat = np.zeros((n, n))
        p_mat[i_rho + k, i_rho + k] = 2.0 * cross
        p_mat[i_y + k, i_y + k] = 2.0 * cross
        q_vec = np.zeros(n)
        q_vec[i_rho + k] = rho0[k] * interference
        prog.add_quadratic(p_mat, q_vec, -gains.a_quad[k, k])

        add_distance_product_rows(i_m + k, m_users0[k], d_users0[k], gains.user_pos[k])
        add_power_link_row(i_m + k, i_y + k, m_users0[k], y_users0[k])

    if j_eves:
        # Harvest floor: quadratic floor in the path-loss factor plus the
        # tangent floor of 1/y, all constants evaluated per harvester.
        row = np.zeros(n)
        rhs = -eh_required
        for j in range(j_eves):
            u_const = float(np.sum(np.abs(gains.c_eve[j]) ** 2))
            s_quad = float(np.sum(np.abs(gains.d_cross[j]) ** 2))
            t_cross = float(np.sum((gains.c_eve[j].conj() * gains.d_cross[j]).real))
            if s_quad <= 0.0:
                rhs += u_const
                continue
            offset, curvature = harvested_power_floor(
                u_const, s_quad, t_cross, 2.0 / s_quad
            )
            # curvature * x^2 >= curvature / y >= curvature * (2 - y') / y0.
            rhs += offset + 2.0 * curvature / y_eves0[j]
            row[i_ye + j] += curvature / y_eves0[j]
            add_distance_product_rows(i_me + j, m_eves0[j], d_eves0[j], gains.eve_pos[j])
            add_power_link_row(i_me + j, i_ye + j, m_eves0[j], y_eves0[j])
        prog.add_linear(row, rhs)

    sol = prog.solve(tol=3e-7)
    if sol.x is None or not np.all(np.isfinite(sol.x)):
        return None
    qx = min(max(float(sol.x[0]), region.x_min), region.x_max)
    qy = min(max(float(sol.x[1]), region.y_min), region.y_max)
    return Position2D(qx, qy)