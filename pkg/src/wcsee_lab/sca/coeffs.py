"""Shared coefficient assembly for the optimization blocks.

The benchmark treats the channel draw as perfectly known (true cascaded
channels, continuous phases).  For a fixed decision context it precomputes

* per-user effective gains a_k and eavesdropper gains b_{j,k} at unit beam
  directions (power block),
* the phase-linear couplings t and direct-link constants c that express
  every received amplitude as c + t^H s (phase block),
* position-free composite gains for the placement block, where only the
  product of the two hop distances carries the position dependence.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ..channels import ChannelRealization, ScenarioConfig, SmallScaleDraw, small_scale_mixtures
from ..geometry import Position2D, distance3d
from ..phy_core import ZfPrecoder


@dataclass(frozen=True)
class PowerGains:
    """gamma_k = p_k a_k / sigma2; eavesdropper powers are p^T-weighted b."""

    a: np.ndarray  # (K,)
    b: np.ndarray  # (J, K)


def power_gains(realization: ChannelRealization, precoder: ZfPrecoder) -> PowerGains:
    b = np.abs(realization.u.conj() @ precoder.directions) ** 2
    return PowerGains(a=precoder.gains.copy(), b=b)


@dataclass(frozen=True)
class PhaseCouplings:
    """Amplitudes as functions of the phase vector s.

    User k hears beam l as t_user[k, l]^H s; harvester j hears beam l as
    c_eve[j, l] + t_eve[j, l]^H s.  Beams carry their allocated power.
    """

    t_user: np.ndarray  # (K, K, M) complex
    t_eve: np.ndarray  # (J, K, M) complex
    c_eve: np.ndarray  # (J, K) complex


def phase_couplings(
    realization: ChannelRealization, precoder: ZfPrecoder, power: np.ndarray
) -> PhaseCouplings:
    beams = precoder.scaled(power)  # (N_t, K)
    gb = realization.g_bs_ris  # (M, N_t)
    k_users = realization.g_ihr.shape[0]
    j_eves = realization.h_uehr.shape[0]
    m = gb.shape[0]
    t_user = np.empty((k_users, k_users, m), dtype=complex)
    for k in range(k_users):
        # v^H Theta G_b w = t^H s with t = (diag(v^H) G_b w)*.
        base = realization.g_ihr[k].conj()[:, None] * gb  # diag(g_k^H) G_b
        t_user[k] = (base @ beams).T.conj()
    t_eve = np.empty((j_eves, k_users, m), dtype=complex)
    c_eve = np.empty((j_eves, k_users), dtype=complex)
    for j in range(j_eves):
        base = realization.h_uehr[j].conj()[:, None] * gb
        t_eve[j] = (base @ beams).T.conj()
        c_eve[j] = realization.h_direct[j].conj() @ beams
    return PhaseCouplings(t_user=t_user, t_eve=t_eve, c_eve=c_eve)


@dataclass(frozen=True)
class PlacementGains:
    """Position-free composite gains for the placement block.

    With the fading and steering responses frozen at the expansion
    position, user k's signal power from beam l is
    a_quad[k, l] / (d_k d_b)^alpha and harvester j's amplitude from beam l
    is c_eve[j, l] + d_cross[j, l] * (d_j d_b)^(-alpha/2).
    """

    a_quad: np.ndarray  # (K, K) real
    d_cross: np.ndarray  # (J, K) complex
    c_eve: np.ndarray  # (J, K) complex
    user_pos: tuple[Position2D, ...]
    eve_pos: tuple[Position2D, ...]
    bs_pos: Position2D
    altitude: float
    alpha: float


def placement_gains(
    cfg: ScenarioConfig,
    draw: SmallScaleDraw,
    q_point: Position2D,
    theta: np.ndarray,
    precoder: ZfPrecoder,
    power: np.ndarray,
    h_direct: np.ndarray,
) -> PlacementGains:
    """Freeze fading and steering at ``q_point``; expose distance dependence."""
    g_bs_small, ihr_small, uehr_small = small_scale_mixtures(cfg, q_point, draw)
    beams = precoder.scaled(power)
    phases = np.exp(1j * np.asarray(theta))
    # rho0 * v^H Theta G_b_small w, for each (receiver, beam) pair.
    k_users, j_eves = cfg.num_ihr, cfg.num_uehr
    a_quad = np.empty((k_users, k_users))
    for k in range(k_users):
        row = (ihr_small[k].conj() * phases) @ g_bs_small @ beams
        a_quad[k] = cfg.rho0**2 * np.abs(row) ** 2
    d_cross = np.empty((j_eves, k_users), dtype=complex)
    c_eve = np.empty((j_eves, k_users), dtype=complex)
    for j in range(j_eves):
        d_cross[j] = cfg.rho0 * (uehr_small[j].conj() * phases) @ g_bs_small @ beams
        c_eve[j] = h_direct[j].conj() @ beams
    return PlacementGains(
        a_quad=a_quad,
        d_cross=d_cross,
        c_eve=c_eve,
        user_pos=cfg.ihr_pos,
        eve_pos=cfg.uehr_pos,
        bs_pos=cfg.bs_pos,
        altitude=cfg.altitude,
        alpha=cfg.alpha,
    )


def hop_distances(gains: PlacementGains, q: Position2D):
    """(d_b, [d_k], [d_j]) at position q."""
    d_b = distance3d(q, gains.bs_pos, gains.altitude)
    d_users = np.array([distance3d(q, w, gains.altitude) for w in gains.user_pos])
    d_eves = np.array([distance3d(q, w, gains.altitude) for w in gains.eve_pos])
    return d_b, d_users, d_eves


def placement_user_sinr(gains: PlacementGains, q: Position2D, sigma2: float) -> np.ndarray:
    """Exact per-user SINR of the frozen-fading placement model at q."""
    d_b, d_users, _ = hop_distances(gains, q)
    k_users = gains.a_quad.shape[0]
    out = np.empty(k_users)
    for k in range(k_users):
        y = (d_users[k] * d_b) ** gains.alpha
        signal = gains.a_quad[k, k]
        interference = float(np.sum(gains.a_quad[k])) - signal
        out[k] = signal / (interference + sigma2 * y)
    return out


def placement_harvested(gains: PlacementGains, q: Position2D) -> np.ndarray:
    """Exact per-harvester received RF power of the placement model at q."""
    d_b, _, d_eves = hop_distances(gains, q)
    j_eves = gains.c_eve.shape[0]
    out = np.empty(j_eves)
    for j in range(j_eves):
        x = (d_eves[j] * d_b) ** (-gains.alpha / 2.0)
        out[j] = float(np.sum(np.abs(gains.c_eve[j] + x * gains.d_cross[j]) ** 2))
    return out
