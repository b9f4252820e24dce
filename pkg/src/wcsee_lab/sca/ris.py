"""Reflection-phase optimization by penalized convex inner approximations.

For fixed beams, powers, and position, maximizes the minimum secrecy rate
over the complex reflection vector s.  The unit-modulus constraint is
relaxed to per-element disks |s_m| <= 1 with a linear penalty that rewards
staying near the previous iterate's magnitudes; the penalty weight grows
geometrically whenever an inner solve exits with interior magnitudes, and
the final vector is restored to unit modulus by elementwise phase
extraction.

Constraint set per iteration, all tangent at the incumbent:

* own-signal quad-over-linear lower bound (signal^2 / slack) keeps the
  user SINR slack honest;
* eavesdropper powers upper-bounded via a bilinear floor on
  (interference slack) x (SINR slack) and tangent floors on the
  interference quadratics;
* the eavesdropper's rate slack enters through the tangent floor of 2^f;
* the secrecy epigraph 2^(zeta + f) <= 1 + rho is narrowed to the
  quadratic toolbox with the trust-capped majorizer of 2^x;
* the harvest floor keeps the tangent lower bounds of the received
  powers.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from ..convex import ConvexProgram
from .coeffs import PhaseCouplings
from .power import TraceRow
from .surrogates import (
    LN2,
    abs_square_lower,
    bilinear_lower,
    exp2_lower,
    exp2_quad_upper,
    hermitian_real_form,
    quad_over_lin_lower,
    real_stack,
)


@dataclass
class RisResult:
    s: np.ndarray  # unit-modulus reflection vector
    zeta: float  # surrogate secrecy value at exit (before projection)
    secrecy: float  # exact model secrecy value of the projected vector
    eh_value: float  # exact model harvested total at the projected vector
    eh_ok: bool
    penalty: float
    iterations: int
    trace: list[TraceRow] = field(default_factory=list)
    relaxed_magnitudes: np.ndarray | None = None


def user_sinr(coup: PhaseCouplings, s: np.ndarray, sigma2: float) -> np.ndarray:
    k_users = coup.t_user.shape[0]
    out = np.empty(k_users)
    for k in range(k_users):
        amps = np.abs(coup.t_user[k].conj() @ s) ** 2  # |t_{k,l}^H s|^2 per beam l
        out[k] = amps[k] / (amps.sum() - amps[k] + sigma2)
    return out


def eve_sinr_matrix(coup: PhaseCouplings, s: np.ndarray, sigma2: float) -> np.ndarray:
    j_eves, k_users = coup.c_eve.shape
    out = np.empty((j_eves, k_users))
    for j in range(j_eves):
        amps = np.abs(coup.c_eve[j] + coup.t_eve[j].conj() @ s) ** 2
        for k in range(k_users):
            out[j, k] = amps[k] / (amps.sum() - amps[k] + sigma2)
    return out


def secrecy_value(coup: PhaseCouplings, s: np.ndarray, sigma2: float) -> float:
    """Exact min-over-users secrecy of the phase model at s (no hinge)."""
    gammas = user_sinr(coup, s, sigma2)
    eves = eve_sinr_matrix(coup, s, sigma2)
    per_user = np.log2(1.0 + gammas) - np.log2(1.0 + eves.max(axis=0))
    return float(per_user.min())


def harvested_value(coup: PhaseCouplings, s: np.ndarray) -> float:
    total = 0.0
    for j in range(coup.c_eve.shape[0]):
        total += float(np.sum(np.abs(coup.c_eve[j] + coup.t_eve[j].conj() @ s) ** 2))
    return total


def ris_phase_sca(
    coup: PhaseCouplings,
    sigma2: float,
    s_init: np.ndarray,
    eh_required: float = 0.0,
    tol: float = 0.01,
    max_iter: int = 100,
    penalty_start: float = 10.0,
    penalty_growth: float = 5.0,
    penalty_cap: float = 1e4,
    trust: float = 2.0,
) -> RisResult:
    """Iterate penalized convex solves; returns the projected phase vector.

    The incumbent always remains feasible for the rebuilt surrogate set, so
    the solved objective (secrecy epigraph plus penalty) never decreases.
    """
    m = coup.t_user.shape[2]
    s = np.asarray(s_init, dtype=complex).copy()
    mags = np.abs(s)
    if np.any(mags > 1.0 + 1e-9):
        raise ValueError("initial reflection magnitudes must lie in the unit disk")
    penalty = penalty_start
    trace: list[TraceRow] = []
    zeta = secrecy_value(coup, s, sigma2)
    it = 0

    while True:
        # Every stage must beat the incumbent under its own penalty weight.
        stage_last = secrecy_value(coup, s, sigma2) + penalty * float(
            np.sum(np.abs(s) ** 2)
        )
        for _ in range(max_iter):
            it += 1
            # Safeguard on exact values: the exact iteration's penalized
            # objective is non-decreasing, so a candidate that dips reveals
            # solver slop; retry on a shrunken trust width (a different,
            # better-conditioned subproblem) before giving up.
            accepted = None
            local_trust = trust
            for _ in range(3):
                candidate = _solve_phase_subproblem(
                    coup, sigma2, s, eh_required, penalty, local_trust
                )
                if candidate is not None:
                    zeta_new = secrecy_value(coup, candidate, sigma2)
                    objective = zeta_new + penalty * float(
                        np.sum(np.abs(candidate) ** 2)
                    )
                    floor_val = stage_last
                    if floor_val is None or objective >= floor_val - 1e-9 * max(
                        1.0, abs(floor_val)
                    ):
                        accepted = (candidate, zeta_new, objective)
                        break
                local_trust /= 4.0
            if accepted is None:
                break
            s_new, zeta_new, objective = accepted
            stage_last = objective
            movement = float(np.max(np.abs(s_new - s))) if m else 0.0
            trace.append(
                TraceRow(
                    block="phase",
                    iteration=it,
                    objective=objective,
                    lam=penalty,
                    residual=abs(zeta_new - zeta),
                )
            )
            # The penalty recentres on the iterate, so the phase walks in
            # small steps even while the epigraph value is momentarily
            # flat; stop only when the iterate itself has settled too.
            converged = abs(zeta_new - zeta) <= tol and movement <= 1e-3
            s, zeta = s_new, zeta_new
            if converged:
                break
        interior_gap = float(np.max(1.0 - np.abs(s))) if m else 0.0
        if interior_gap <= 1e-3 or penalty >= penalty_cap:
            break
        penalty = min(penalty * penalty_growth, penalty_cap)

    relaxed = np.abs(s)
    projected = np.where(relaxed < 1e-9, 1.0 + 0.0j, s / np.maximum(relaxed, 1e-9))
    secrecy = secrecy_value(coup, projected, sigma2)
    eh_value = harvested_value(coup, projected)
    return RisResult(
        s=projected,
        zeta=zeta,
        secrecy=secrecy,
        eh_value=eh_value,
        eh_ok=eh_value >= eh_required - 1e-12,
        penalty=penalty,
        iterations=it,
        trace=trace,
        relaxed_magnitudes=relaxed,
    )


def _solve_phase_subproblem(coup, sigma2, s_point, eh_required, penalty, trust):
    """One convex solve around s_point; returns (s, zeta, solved objective)."""
    j_eves, k_users = coup.c_eve.shape
    m = coup.t_user.shape[2]

    # Incumbent slack values (tangency points), nudged strictly feasible.
    margin = 1e-9
    gammas = user_sinr(coup, s_point, sigma2)
    rho0 = np.maximum(gammas * (1.0 - margin), 1e-12)
    xi0 = np.empty((j_eves, k_users))
    rho_e0 = np.empty((j_eves, k_users))
    for j in range(j_eves):
        amps = np.abs(coup.c_eve[j] + coup.t_eve[j].conj() @ s_point) ** 2
        for k in range(k_users):
            xi0[j, k] = (amps.sum() - amps[k] + sigma2) * (1.0 - margin)
            rho_e0[j, k] = amps[k] / xi0[j, k] * (1.0 + margin) + 1e-12
    f0 = np.log2(1.0 + rho_e0.max(axis=0)) * (1.0 + margin) + 1e-12
    zeta0 = float(np.min(np.log2(1.0 + rho0) - f0))
    z0 = zeta0 + f0  # per-user epigraph points

    # Layout: [Re s, Im s, zeta, R (K), Y (J*K), f (K), X (J*K)] where the
    # slack variables are normalized by their incumbent values
    # (rho = rho0 R, rho_e = rho_e0 Y, xi = xi0 X), so every primal variable
    # sits near one and the bilinear floor is applied to a balanced pair.
    n = 2 * m + 1 + k_users + j_eves * k_users + k_users + j_eves * k_users
    i_zeta = 2 * m
    i_rho = i_zeta + 1
    i_rho_e = i_rho + k_users
    i_f = i_rho_e + j_eves * k_users
    i_xi = i_f + k_users

    def jk(base, j, k):
        return base + j * k_users + k

    prog = ConvexProgram(n)
    objective = np.zeros(n)
    objective[i_zeta] = -1.0
    objective[: 2 * m] = -2.0 * penalty * real_stack(s_point)
    prog.set_linear_objective(objective)

    lb = np.full(n, -np.inf)
    ub = np.full(n, np.inf)
    lb[: 2 * m], ub[: 2 * m] = -1.0, 1.0
    lb[i_zeta], ub[i_zeta] = -100.0, 100.0
    lb[i_rho : i_rho + k_users] = 0.0
    lb[i_rho_e : i_rho_e + j_eves * k_users] = 0.0
    lb[i_f : i_f + k_users] = 0.0
    lb[i_xi : i_xi + j_eves * k_users] = 1e-8
    prog.add_box(lb=lb, ub=ub)

    # (a) own-signal floor: interference quadratic + noise <= signal bound.
    for k in range(k_users):
        interf = np.zeros((m, m), dtype=complex)
        for l in range(k_users):
            if l != k:
                interf += np.outer(coup.t_user[k, l], coup.t_user[k, l].conj())
        bound = quad_over_lin_lower(coup.t_user[k, k], s_point, rho0[k])
        p_mat = np.zeros((n, n))
        p_mat[: 2 * m, : 2 * m] = 2.0 * hermitian_real_form(interf)
        q = np.zeros(n)
        q[: 2 * m] = -real_stack(bound.grad_s)
        q[i_rho + k] = -bound.coeff_rho * rho0[k]
        prog.add_quadratic(p_mat, q, sigma2 - bound.const)

    for j in range(j_eves):
        for k in range(k_users):
            t = coup.t_eve[j, k]
            c = coup.c_eve[j, k]
            if float(np.sum(np.abs(t) ** 2)) + abs(c) ** 2 <= 1e-30:
                # Dead coupling: the pair contributes nothing and its rows
                # would only degenerate the cone data.
                continue
            # (b) eavesdropper signal quadratic <= bilinear floor on the
            # normalized pair (both coordinates are 1 at the incumbent).
            prod = xi0[j, k] * rho_e0[j, k]
            floor = bilinear_lower(1.0, 1.0)
            p_mat = np.zeros((n, n))
            p_mat[: 2 * m, : 2 * m] = 2.0 * hermitian_real_form(
                np.outer(t, t.conj())
            )
            idx_xi, idx_re = jk(i_xi, j, k), jk(i_rho_e, j, k)
            p_mat[idx_xi, idx_xi] += 0.5 * prod
            p_mat[idx_re, idx_re] += 0.5 * prod
            p_mat[idx_xi, idx_re] -= 0.5 * prod
            p_mat[idx_re, idx_xi] -= 0.5 * prod
            q = np.zeros(n)
            q[: 2 * m] = real_stack(2.0 * c * t)  # Re{(2 c t)^H s} = 2 Re{c* t^H s}
            q[idx_xi] = -floor.half_sum * prod
            q[idx_re] = -floor.half_sum * prod
            const = abs(c) ** 2 + floor.half_sum**2 * prod
            prog.add_quadratic(p_mat, q, const)

            # (c) interference slack below its tangent floor.
            row = np.zeros(n)
            row[idx_xi] = xi0[j, k]
            rhs = sigma2
            for l in range(k_users):
                if l == k:
                    continue
                tangent = abs_square_lower(coup.c_eve[j, l], coup.t_eve[j, l], s_point)
                row[: 2 * m] -= real_stack(tangent.grad)
                rhs += tangent.const
            prog.add_linear(row, rhs)

            # (d) eavesdropper rate slack: 1 + rho_e <= tangent floor of 2^f.
            gamma_line = exp2_lower(f0[k])
            row = np.zeros(n)
            row[idx_re] = rho_e0[j, k]
            row[i_f + k] = -gamma_line.level * LN2
            rhs = gamma_line.level * (1.0 - LN2 * f0[k]) - 1.0
            prog.add_linear(row, rhs)

    # (e) secrecy epigraph via the trust-capped majorizer of 2^(zeta + f).
    for k in range(k_users):
        maj = exp2_quad_upper(z0[k], trust)
        c0, c1 = maj.level, maj.level * LN2
        c2 = maj.level * maj.curve * LN2 * LN2
        scale = 1.0 / c0
        p_mat = np.zeros((n, n))
        for ia in (i_zeta, i_f + k):
            for ib in (i_zeta, i_f + k):
                p_mat[ia, ib] += 2.0 * c2 * scale
        q = np.zeros(n)
        q[i_zeta] = (c1 - 2.0 * c2 * z0[k]) * scale
        q[i_f + k] = (c1 - 2.0 * c2 * z0[k]) * scale
        q[i_rho + k] = -rho0[k] * scale
        const = (c0 - c1 * z0[k] + c2 * z0[k] ** 2 - 1.0) * scale
        prog.add_quadratic(p_mat, q, const)
        row = np.zeros(n)
        row[i_zeta] = 1.0
        row[i_f + k] = 1.0
        prog.add_linear(row, z0[k] + trust)

    # Harvest floor: tangent lower bounds on every received power.
    if eh_required > 0.0 and j_eves:
        row = np.zeros(n)
        rhs = -eh_required
        for j in range(j_eves):
            for k in range(k_users):
                tangent = abs_square_lower(coup.c_eve[j, k], coup.t_eve[j, k], s_point)
                row[: 2 * m] -= real_stack(tangent.grad)
                rhs += tangent.const
        prog.add_linear(row, rhs)

    # Unit-disk cones per element.
    for i in range(m):
        f_rows = np.zeros((2, n))
        f_rows[0, i] = 1.0
        f_rows[1, m + i] = 1.0
        prog.add_soc(f_rows, np.zeros(2), np.zeros(n), 1.0)

    # Moderate accuracy suffices: every candidate is certified downstream
    # against exact objective values, so the safeguard filters slop.
    sol = prog.solve(tol=3e-7)
    if sol.x is None or not np.all(np.isfinite(sol.x)):
        return None
    candidate = sol.x[:m] + 1j * sol.x[m : 2 * m]
    # Solver slop can leave magnitudes marginally outside the relaxed disk;
    # clip so the exact certification compares feasible points.
    mags = np.abs(candidate)
    over = mags > 1.0
    if np.any(over):
        candidate = candidate.copy()
        candidate[over] /= mags[over]
    return candidate
