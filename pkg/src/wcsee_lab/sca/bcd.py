"""Block-coordinate benchmark: power, phases, and position in rotation.

The model-based reference solves the idealized problem (perfectly known
channels, continuous phases) for one frozen fading draw.  Each outer pass
recomputes the zero-forcing directions at the current phases and position,
then runs the three blocks in order: ratio-maximizing power allocation,
penalized phase optimization, and placement.  The realized efficiency

    eta = (min secrecy rate) / (amplifier-scaled radiated power + circuit power)

is evaluated with fresh zero-forcing at the updated decision after every
pass; the loop stops when eta stalls or the pass budget runs out.

Efficiency is not guaranteed to climb across passes (directions are
recomputed after the phase and position moves, and the placement block
maximizes the minimum rate rather than secrecy); only the blocks' own
traces are monotone.  A block that fails or goes infeasible simply leaves
its variable at the incumbent.
"""

from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field

import numpy as np

from .. import phy_core
from ..channels import RngStream, ScenarioConfig, SmallScaleDraw, compose_channels, sample_small_scale
from ..geometry import Position2D
from .coeffs import phase_couplings, placement_gains
from .power import InfeasibleBlockError, TraceRow, dinkelbach_power
from .ris import ris_phase_sca
from .uav import uav_location_sca


@dataclass
class OuterRow:
    outer: int
    eta: float
    secrecy: float
    sum_power: float

    FIELDS = ("outer", "eta", "secrecy", "sum_power")


@dataclass
class BcdResult:
    power: np.ndarray
    s: np.ndarray
    q: Position2D
    eta: float
    secrecy: float
    eta_trace: list[OuterRow] = field(default_factory=list)
    block_rows: list[tuple[int, TraceRow]] = field(default_factory=list)
    eh_rescued: bool = False  # power rescaled upward to restore the harvest floor
    eh_violated: bool = False  # floor still broken after projection and rescue

    @property
    def outer_iterations(self) -> int:
        return len(self.eta_trace)


def bcd_outer(
    cfg: ScenarioConfig,
    seed: int = 0,
    draw: SmallScaleDraw | None = None,
    q_init: Position2D | None = None,
    s_init: np.ndarray | None = None,
    p_init: np.ndarray | None = None,
    outer_tol: float = 1e-3,
    max_outer: int = 20,
    inner_tol: float = 1e-3,
    inner_iters: int = 60,
    penalty_start: float = 10.0,
) -> BcdResult:
    """Run the benchmark on one fading draw of ``cfg``.

    The CSI error of the draw is zeroed: this reference case assumes the
    harvester channels are perfectly known, and the secrecy evaluation
    uses the exact eavesdropping ratios.
    """
    pcsi = dataclasses.replace(cfg, nu=0.0)
    if draw is None:
        draw = sample_small_scale(pcsi, RngStream(seed).child("bcd-draw"))
    if np.any(draw.csi_error):
        draw = dataclasses.replace(draw, csi_error=np.zeros_like(draw.csi_error))

    q = q_init if q_init is not None else pcsi.start
    s = (
        np.asarray(s_init, dtype=complex).copy()
        if s_init is not None
        else np.ones(pcsi.m_ris, dtype=complex)
    )
    power = (
        np.asarray(p_init, float).copy()
        if p_init is not None
        else np.full(pcsi.num_ihr, pcsi.p_max / pcsi.num_ihr)
    )
    eh_required = (
        phy_core.eh_inverse(pcsi.e_h, pcsi.eh_model) if pcsi.e_h > 0 else 0.0
    )

    result = BcdResult(power=power, s=s, q=q, eta=0.0, secrecy=0.0)
    eta_prev = 0.0

    for outer in range(1, max_outer + 1):
        realization = compose_channels(pcsi, q, np.angle(s), draw)
        precoder = phy_core.zf_precoder(realization.h_cascade)

        # Power block at fixed phases and position.
        b_gains = np.abs(realization.u.conj() @ precoder.directions) ** 2
        try:
            power_res = dinkelbach_power(
                precoder.gains,
                b_gains,
                pcsi.sigma2,
                pcsi.p_max,
                pcsi.varrho,
                pcsi.p0,
                eh_required=eh_required,
                p_init=power,
                tol=inner_tol,
                max_iter=inner_iters,
            )
            power = power_res.power
            result.block_rows.extend((outer, row) for row in power_res.trace)
        except InfeasibleBlockError:
            pass  # keep the incumbent allocation

        # Phase block at fixed beams and position.
        coup = phase_couplings(realization, precoder, power)
        phase_res = ris_phase_sca(
            coup,
            pcsi.sigma2,
            s_init=s,
            eh_required=eh_required,
            tol=inner_tol,
            max_iter=inner_iters,
            penalty_start=penalty_start,
        )
        result.block_rows.extend((outer, row) for row in phase_res.trace)
        s = phase_res.s
        if eh_required > 0.0 and not phase_res.eh_ok and phase_res.eh_value > 0.0:
            # Unit-modulus restoration can break the harvest floor; restore
            # it by scaling every power up within the budget if possible.
            scale = eh_required / phase_res.eh_value
            if float(power.sum()) * scale <= pcsi.p_max:
                power = power * scale
                result.eh_rescued = True
            else:
                result.eh_violated = True

        # Placement block at fixed beams and phases.
        gains = placement_gains(
            pcsi, draw, q, np.angle(s), precoder, power, realization.h_direct
        )
        uav_res = uav_location_sca(
            gains,
            pcsi.sigma2,
            pcsi.region,
            q_init=q,
            eh_required=eh_required,
            tol=inner_tol,
            max_iter=inner_iters,
        )
        result.block_rows.extend((outer, row) for row in uav_res.trace)
        q = uav_res.q

        # Realized efficiency with fresh zero-forcing at the new decision.
        realization = compose_channels(pcsi, q, np.angle(s), draw)
        precoder = phy_core.zf_precoder(realization.h_cascade)
        _, secrecy = phy_core.secrecy_rate(realization, precoder, power, pcsi)
        eta = phy_core.wcsee(secrecy, power, pcsi.varrho, pcsi.p0)
        result.eta_trace.append(
            OuterRow(outer=outer, eta=eta, secrecy=secrecy, sum_power=float(power.sum()))
        )
        result.power, result.s, result.q = power, s, q
        result.eta, result.secrecy = eta, secrecy
        if abs(eta - eta_prev) <= outer_tol:
            break
        eta_prev = eta

    return result
