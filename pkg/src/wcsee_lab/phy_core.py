"""Deterministic physical-layer math for the secure downlink.

Zero-forcing precoding, legitimate and eavesdropper SINRs, worst-case
bounds under norm-bounded CSI error, the logistic energy-harvesting model,
and the worst-case secrecy energy efficiency (WCSEE) objective.

All powers are in Watts, rates in bits/s/Hz, and the WCSEE objective in
bits/Joule/Hz.  Everything here is pure computation on explicit inputs and
safe for concurrent use.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import TYPE_CHECKING

import numpy as np

if TYPE_CHECKING:  # pragma: no cover - import only for type checkers
    from .channels import ChannelRealization, ScenarioConfig


class RankDeficientError(ValueError):
    """Channel matrix too ill-conditioned for a zero-forcing solve.

    Signals a degenerate draw: callers either resample the channel or
    penalize the decision that produced it.
    """


class DomainError(ValueError):
    """Argument outside the invertible range of the harvesting model."""


def positive_part(x):
    """Exact hinge [x]^+ = max(x, 0), elementwise."""
    return np.maximum(x, 0.0)


# ---------------------------------------------------------------------------
# Zero-forcing precoding
# ---------------------------------------------------------------------------

# Condition-number ceiling on H^H H beyond which the normal-equations solve
# is at machine-precision breakdown.
_COND_LIMIT = 1e12


@dataclass(frozen=True)
class ZfPrecoder:
    """Normalized zero-forcing beam directions and their effective gains.

    ``directions`` has unit-norm columns p_hat_k with h_{c,i}^H p_hat_k = 0
    for i != k; ``gains`` holds a_k = |h_{c,k}^H p_hat_k|^2.
    """

    directions: np.ndarray  # (N_t, K) complex, unit-norm columns
    gains: np.ndarray  # (K,) real, positive

    @property
    def num_users(self) -> int:
        return self.directions.shape[1]

    def scaled(self, power: np.ndarray) -> np.ndarray:
        """Full precoders p_k = sqrt(p_k) * p_hat_k as columns, (N_t, K)."""
        return self.directions * np.sqrt(np.asarray(power, dtype=float))[None, :]


def zf_precoder(h_cascade: np.ndarray) -> ZfPrecoder:
    """Zero-forcing directions from the cascaded channel matrix (N_t x K).

    Columns of H (H^H H)^{-1} are normalized to unit norm.  Raises
    :class:`RankDeficientError` when cond(H^H H) exceeds 1e12.
    """
    h = np.asarray(h_cascade)
    n_t, k = h.shape
    if n_t < k:
        raise RankDeficientError(f"need at least as many antennas as users ({n_t} < {k})")
    sv = np.linalg.svd(h, compute_uv=False)
    if sv[-1] <= 0.0 or (sv[0] / sv[-1]) ** 2 > _COND_LIMIT:
        raise RankDeficientError("cascaded channel matrix is numerically rank deficient")
    # H (H^H H)^{-1} via the thin QR of H: equals Q R^{-H}.
    q, r = np.linalg.qr(h)
    raw = q @ np.linalg.inv(r).conj().T
    norms = np.linalg.norm(raw, axis=0)
    directions = raw / norms[None, :]
    # h_k^H raw_k = 1 by construction, so a_k = 1 / ||raw_k||^2; evaluate the
    # inner product explicitly anyway to reflect the realized directions.
    gains = np.abs(np.einsum("ik,ik->k", h.conj(), directions)) ** 2
    return ZfPrecoder(directions=directions, gains=gains)


# ---------------------------------------------------------------------------
# SINRs and secrecy
# ---------------------------------------------------------------------------


def legit_sinr(precoder: ZfPrecoder, power: np.ndarray, sigma2: float) -> np.ndarray:
    """Per-user SINR under zero-forcing: gamma_k = p_k a_k / sigma^2."""
    p = np.asarray(power, dtype=float)
    if np.any(p < 0):
        raise ValueError("powers must be non-negative")
    return p * precoder.gains / sigma2


def eve_sinr(
    u: np.ndarray, precoder: ZfPrecoder, power: np.ndarray, sigma2: float, k: int
) -> float:
    """Eavesdropping SINR at a receiver with channel ``u`` decoding user ``k``.

    gamma = p_k b_k / (sum_{l != k} p_l b_l + sigma^2) with
    b_l = |u^H p_hat_l|^2.
    """
    p = np.asarray(power, dtype=float)
    b = np.abs(u.conj() @ precoder.directions) ** 2
    interference = float(np.sum(np.delete(p * b, k)))
    return float(p[k] * b[k] / (interference + sigma2))


def worst_case_eve_sinr(
    u_hat: np.ndarray,
    precoder: ZfPrecoder,
    power: np.ndarray,
    sigma2: float,
    nu: float,
    k: int,
) -> float:
    """Upper bound on the eavesdropping SINR over the nu-ball of CSI errors.

    The numerator amplitude grows by nu per unit beam norm and each
    interference amplitude shrinks by nu (hinged at zero); with unit-norm
    directions this reduces to

        p_k (sqrt(b_k) + nu)^2 / (sum_{l != k} p_l ([sqrt(b_l) - nu]^+)^2 + sigma^2)

    where b_l = |u_hat^H p_hat_l|^2.  Dominates the exact SINR for every
    error with ||delta u|| <= nu.
    """
    if nu < 0:
        raise ValueError("uncertainty radius must be non-negative")
    p = np.asarray(power, dtype=float)
    root_b = np.abs(u_hat.conj() @ precoder.directions)
    num = p[k] * (root_b[k] + nu) ** 2
    shrunk = positive_part(np.delete(root_b, k) - nu) ** 2
    den = float(np.sum(np.delete(p, k) * shrunk)) + sigma2
    return float(num / den)


def secrecy_rate(
    realization: "ChannelRealization",
    precoder: ZfPrecoder,
    power: np.ndarray,
    cfg: "ScenarioConfig",
) -> tuple[np.ndarray, float]:
    """Per-user worst-case secrecy rates and their minimum.

    R_k = [log2(1 + gamma_k) - log2(1 + gamma_{E,k})]^+ where gamma_{E,k}
    maximizes the worst-case bound over all energy-harvesting receivers.
    With no such receivers the max is vacuous and R_k is the clean rate.
    """
    p = np.asarray(power, dtype=float)
    gammas = legit_sinr(precoder, p, cfg.sigma2)
    k_users = precoder.num_users
    rates = np.zeros(k_users)
    for k in range(k_users):
        g_eve = 0.0
        for u_hat in realization.u_hat:
            g_eve = max(
                g_eve, worst_case_eve_sinr(u_hat, precoder, p, cfg.sigma2, cfg.nu, k)
            )
        rates[k] = max(0.0, math.log2(1.0 + gammas[k]) - math.log2(1.0 + g_eve))
    return rates, float(np.min(rates))


# ---------------------------------------------------------------------------
# Nonlinear energy harvesting
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EhModel:
    """Logistic RF-to-DC harvesting model.

    Omega(P) = b2 / (k1 * (1 + exp(-b0 (P - b1)))) - k2, strictly increasing
    in P and saturating at b2/k1 - k2.
    """

    b0: float
    b1: float
    b2: float
    k1: float
    k2: float

    def __post_init__(self):
        if min(self.b0, self.b1, self.b2, self.k1, self.k2) <= 0:
            raise ValueError("harvesting constants must be positive")

    @property
    def saturation(self) -> float:
        return self.b2 / self.k1 - self.k2

    @classmethod
    def default_calibrated(
        cls, b0: float = 150.0, b1: float = 0.014, b2: float = 0.024, k1: float = 1.0
    ) -> "EhModel":
        """Model with k2 chosen so that zero input harvests exactly zero.

        Omega(0) = 0 forces k2 = b2 / (k1 (1 + exp(b0 b1))); no RF in, no DC
        out.  The remaining constants are configuration.
        """
        k2 = b2 / (k1 * (1.0 + math.exp(b0 * b1)))
        return cls(b0=b0, b1=b1, b2=b2, k1=k1, k2=k2)


def eh_dc(p_rf: float, model: EhModel) -> float:
    """Harvested DC power for received RF power ``p_rf`` >= 0."""
    if p_rf < 0:
        raise ValueError("RF power must be non-negative")
    return model.b2 / (model.k1 * (1.0 + math.exp(-model.b0 * (p_rf - model.b1)))) - model.k2


def eh_inverse(x: float, model: EhModel) -> float:
    """RF power needed to harvest DC power ``x``; inverse of :func:`eh_dc`.

    Defined only below the saturation level; raises :class:`DomainError`
    otherwise (the requirement is unattainable for this harvester).
    """
    arg = model.b2 / (model.k1 * (x + model.k2)) - 1.0
    if arg <= 0.0:
        raise DomainError(
            f"harvest target {x} is at or above the saturation level {model.saturation}"
        )
    return model.b1 - math.log(arg) / model.b0


def eh_lower_bound(
    u_hat: np.ndarray, precoder: ZfPrecoder, power: np.ndarray, nu: float
) -> float:
    """Guaranteed received RF power at one receiver over the nu-ball.

    sum_k ([ |u_hat^H p_k| - nu ||p_k|| ]^+)^2 with p_k = sqrt(p_k) p_hat_k;
    every true channel in the ball receives at least this much.
    """
    if nu < 0:
        raise ValueError("uncertainty radius must be non-negative")
    p = np.asarray(power, dtype=float)
    root_b = np.abs(u_hat.conj() @ precoder.directions)
    return float(np.sum(p * positive_part(root_b - nu) ** 2))


def eh_constraint(
    realization: "ChannelRealization",
    precoder: ZfPrecoder,
    power: np.ndarray,
    cfg: "ScenarioConfig",
) -> tuple[float, float, bool]:
    """(guaranteed total RF power, required RF power, satisfied?) triple.

    The constraint sums the per-receiver worst-case bounds and compares
    against the RF power needed for the configured DC target.
    """
    total = sum(
        eh_lower_bound(u_hat, precoder, power, cfg.nu) for u_hat in realization.u_hat
    )
    required = eh_inverse(cfg.e_h, cfg.eh_model) if cfg.e_h > 0 else 0.0
    return total, required, total >= required


# ---------------------------------------------------------------------------
# Objective
# ---------------------------------------------------------------------------


def total_power(power: np.ndarray, varrho: float, p0: float) -> float:
    """Consumed power: amplifier-inefficiency-scaled radiated power plus circuit power."""
    return varrho * float(np.sum(power)) + p0


def wcsee(r_sec: float, power: np.ndarray, varrho: float, p0: float) -> float:
    """Worst-case secrecy energy efficiency: min secrecy rate per consumed Watt."""
    if p0 <= 0:
        raise ValueError("circuit power must be positive")
    return r_sec / total_power(power, varrho, p0)
