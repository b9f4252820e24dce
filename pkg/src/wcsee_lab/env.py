"""MDP wrapper around the physical layer.

States flatten the cascaded user channels and the estimated harvester
channels (real and imaginary parts) plus the UAV coordinates.  Actions in
[-1, 1]^(K+M+2) map to a power allocation on the transmit budget, a
(quantized) phase vector, and an absolute UAV position.  The reward is the
worst-case secrecy energy efficiency, gated to zero whenever the guaranteed
harvested power misses the target.

Within an episode the receiver placement and all small-scale fading are
frozen; each step re-derives only the parts of the channel that depend on
the chosen UAV position and phases, so actions change what the agent
observes next.  Fresh placements and fading are drawn across episodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import phy_core
from .channels import (
    ChannelRealization,
    RngStream,
    SmallScaleDraw,
    ScenarioConfig,
    compose_channels,
    sample_disk_positions,
    sample_small_scale,
)
from .geometry import Position2D, project_uav, quantize_phases


@dataclass(frozen=True)
class ControlDecision:
    """Joint decision: per-user powers (W), phase vector, UAV position."""

    power: np.ndarray
    theta: np.ndarray
    q: Position2D

    @property
    def sum_power(self) -> float:
        return float(np.sum(self.power))


def map_action(
    action: np.ndarray, cfg: ScenarioConfig, discrete_phases: bool = True
) -> ControlDecision:
    """Map a raw action in [-1, 1]^(K+M+2) to a feasible decision.

    Power entries are shifted to [0, 1] and rescaled so that they sum to
    exactly the budget (all-zero stays all-zero); phases land in [0, 2pi)
    and snap to the codebook in discrete mode; the position is mapped
    affinely into the hover region and clamped for safety.
    """
    a = np.asarray(action, dtype=float)
    k, m = cfg.num_ihr, cfg.m_ris
    if a.shape != (k + m + 2,):
        raise ValueError(f"action must have shape ({k + m + 2},), got {a.shape}")
    if np.any(np.abs(a) > 1.0 + 1e-9):
        raise ValueError("action components must lie in [-1, 1]")

    raw_power = (a[:k] + 1.0) / 2.0
    total = float(np.sum(raw_power))
    power = cfg.p_max * raw_power / total if total > 0.0 else np.zeros(k)

    theta = np.mod((a[k : k + m] + 1.0) * np.pi, 2.0 * np.pi)
    if discrete_phases:
        theta = quantize_phases(theta, cfg.codebook)

    reg = cfg.region
    q = Position2D(
        reg.x_min + (a[k + m] + 1.0) / 2.0 * (reg.x_max - reg.x_min),
        reg.y_min + (a[k + m + 1] + 1.0) / 2.0 * (reg.y_max - reg.y_min),
    )
    return ControlDecision(power=power, theta=theta, q=project_uav(q, reg))


def state_dim(cfg: ScenarioConfig) -> int:
    return 2 * cfg.n_t * cfg.num_ihr + 2 * cfg.n_t * cfg.num_uehr + 2


def action_dim(cfg: ScenarioConfig) -> int:
    return cfg.num_ihr + cfg.m_ris + 2


@dataclass
class StepRecord:
    """One trajectory row for CSV logging."""

    episode: int
    step: int
    reward: float
    r_sec: float
    sum_power: float
    eh_slack: float
    q_x: float
    q_y: float

    FIELDS = ("episode", "step", "reward", "r_sec", "sum_power", "eh_slack", "q_x", "q_y")

    def as_tuple(self):
        return (
            self.episode,
            self.step,
            self.reward,
            self.r_sec,
            self.sum_power,
            self.eh_slack,
            self.q_x,
            self.q_y,
        )


class SecureDownlinkEnv:
    """Episodic environment for joint power / phase / position control."""

    def __init__(
        self,
        cfg: ScenarioConfig,
        seed: int = 0,
        horizon: int = 200,
        discrete_phases: bool = True,
        redraw_per_episode: bool = True,
        log_trajectory: bool = False,
    ):
        self.cfg_template = cfg
        self.horizon = horizon
        self.discrete_phases = discrete_phases
        self.redraw_per_episode = redraw_per_episode
        self.log_trajectory = log_trajectory
        self._root = RngStream(seed)
        self._episode = -1
        self._step = 0
        self.cfg: ScenarioConfig | None = None
        self._draw: SmallScaleDraw | None = None
        self.realization: ChannelRealization | None = None
        self.trajectory: list[StepRecord] = []
        self._obs_scale_h = 1.0
        self._obs_scale_u = 1.0

    # -- lifecycle ---------------------------------------------------------

    def reset(self) -> np.ndarray:
        """Start a new episode and return the initial state."""
        self._episode += 1
        self._step = 0
        if self.cfg is None or self.redraw_per_episode:
            stream = self._root.child(f"episode-{self._episode if self.redraw_per_episode else 0}")
            cfg = self.cfg_template
            ihr = sample_disk_positions(
                cfg.ihr_disk_center, cfg.ihr_disk_radius, cfg.num_ihr, stream.child("place-ihr")
            )
            uehr = sample_disk_positions(
                cfg.uehr_disk_center, cfg.uehr_disk_radius, cfg.num_uehr, stream.child("place-uehr")
            )
            self.cfg = cfg.with_positions(ihr, uehr)
            self._draw = sample_small_scale(self.cfg, stream.child("fading"))
        q0 = self.cfg.start
        theta0 = np.zeros(self.cfg.m_ris)
        self.realization = compose_channels(self.cfg, q0, theta0, self._draw)
        self._calibrate_obs_scales()
        return self._observe()

    def step(self, action: np.ndarray) -> tuple[float, np.ndarray, bool, dict]:
        """Apply one decision; returns (reward, next_state, done, info).

        The reward is the WCSEE when the guaranteed-harvest constraint
        holds and exactly zero otherwise.  A numerically degenerate channel
        draw (rank-deficient ZF solve) is penalized with zero reward.
        """
        if self.realization is None:
            raise RuntimeError("call reset() before step()")
        decision = map_action(action, self.cfg, self.discrete_phases)
        self.realization = compose_channels(self.cfg, decision.q, decision.theta, self._draw)

        reward, r_sec, eh_slack, info = self._score(decision)
        self._step += 1
        done = self._step >= self.horizon
        obs = self._observe()
        if self.log_trajectory:
            self.trajectory.append(
                StepRecord(
                    episode=self._episode,
                    step=self._step - 1,
                    reward=reward,
                    r_sec=r_sec,
                    sum_power=decision.sum_power,
                    eh_slack=eh_slack,
                    q_x=decision.q.x,
                    q_y=decision.q.y,
                )
            )
        return reward, obs, done, info

    # -- scoring -----------------------------------------------------------

    def _score(self, decision: ControlDecision) -> tuple[float, float, float, dict]:
        cfg = self.cfg
        info: dict = {"decision": decision}
        try:
            precoder = phy_core.zf_precoder(self.realization.h_cascade)
        except phy_core.RankDeficientError:
            info.update(rank_deficient=True, eh_ok=False, wcsee=0.0, r_sec=0.0)
            return 0.0, 0.0, 0.0, info
        _, r_sec = phy_core.secrecy_rate(self.realization, precoder, decision.power, cfg)
        total, required, eh_ok = phy_core.eh_constraint(
            self.realization, precoder, decision.power, cfg
        )
        value = phy_core.wcsee(r_sec, decision.power, cfg.varrho, cfg.p0)
        reward = value if eh_ok else 0.0
        info.update(
            rank_deficient=False, eh_ok=eh_ok, wcsee=value, r_sec=r_sec,
            eh_total=total, eh_required=required,
        )
        return reward, r_sec, total - required, info

    def score_decision(self, decision: ControlDecision) -> float:
        """Gated WCSEE of an arbitrary decision (used by grid oracles)."""
        realization = compose_channels(self.cfg, decision.q, decision.theta, self._draw)
        try:
            precoder = phy_core.zf_precoder(realization.h_cascade)
        except phy_core.RankDeficientError:
            return 0.0
        _, r_sec = phy_core.secrecy_rate(realization, precoder, decision.power, self.cfg)
        _, _, eh_ok = phy_core.eh_constraint(realization, precoder, decision.power, self.cfg)
        if not eh_ok:
            return 0.0
        return phy_core.wcsee(r_sec, decision.power, self.cfg.varrho, self.cfg.p0)

    # -- observation -------------------------------------------------------

    def _calibrate_obs_scales(self):
        h = self.realization.h_cascade
        u = self.realization.u_hat
        self._obs_scale_h = float(np.sqrt(np.mean(np.abs(h) ** 2))) or 1.0
        self._obs_scale_u = float(np.sqrt(np.mean(np.abs(u) ** 2))) or 1.0

    def _observe(self) -> np.ndarray:
        """Flatten channels and position into the state vector.

        Channel entries are divided by their episode-initial RMS and the
        position is normalized to the hover region; pure rescaling for
        network conditioning, frozen per episode so the map stays
        deterministic.
        """
        cfg = self.cfg
        h = self.realization.h_cascade / self._obs_scale_h
        u = self.realization.u_hat / self._obs_scale_u
        reg = cfg.region
        span_x = reg.x_max - reg.x_min or 1.0
        span_y = reg.y_max - reg.y_min or 1.0
        q = self.realization.q
        pos = np.array(
            [
                2.0 * (q.x - reg.x_min) / span_x - 1.0,
                2.0 * (q.y - reg.y_min) / span_y - 1.0,
            ]
        )
        return np.concatenate(
            [h.real.ravel(), h.imag.ravel(), u.real.ravel(), u.imag.ravel(), pos]
        )
