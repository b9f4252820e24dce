"""Random synthesis of all channel quantities for one scenario draw.

The air-to-ground links (BS->RIS, RIS->user, RIS->harvester) follow a
distance path-loss law with Rician small-scale fading whose line-of-sight
component is the RIS steering vector toward the node.  Ground BS->harvester
links are Rayleigh.  The harvesters' cascaded channels are only known up to
a norm-bounded error of radius nu.

Sampling is split into a *small-scale draw* (everything random) and a
deterministic *composition* step that applies distances, steering vectors,
and the reflection phases; an episode can therefore freeze fading and
re-derive only the parts that depend on the UAV position and the phase
vector.
"""

from __future__ import annotations

import io
import math
import struct
import zlib
from dataclasses import dataclass, field, replace

import numpy as np

from .geometry import (
    PhaseCodebook,
    Position2D,
    UavRegion,
    azimuth,
    distance3d,
    steering_vector,
)
from .phy_core import EhModel


class ConfigError(ValueError):
    """Inconsistent scenario configuration."""


# ---------------------------------------------------------------------------
# RNG streams
# ---------------------------------------------------------------------------


class RngStream:
    """Named, splittable random stream on top of the counter-based Philox.

    Children are derived from the root entropy and a stable hash of the
    child name, so streams for distinct entities never interact: adding a
    harvester does not perturb the user channel draws.
    """

    def __init__(self, seed, _spawn_key: tuple = ()):
        if isinstance(seed, np.random.SeedSequence):
            self._seq = seed
        else:
            self._seq = np.random.SeedSequence(seed, spawn_key=_spawn_key)
        self.generator = np.random.Generator(np.random.Philox(self._seq))

    def child(self, name: str) -> "RngStream":
        key = zlib.crc32(name.encode("utf-8"))
        return RngStream(
            np.random.SeedSequence(self._seq.entropy, spawn_key=self._seq.spawn_key + (key,))
        )

    def standard_normal(self, shape):
        return self.generator.standard_normal(shape)

    def complex_normal(self, shape):
        """CN(0, 1) entries: unit-variance circularly symmetric Gaussians."""
        g = self.generator
        return (g.standard_normal(shape) + 1j * g.standard_normal(shape)) / math.sqrt(2.0)

    def uniform(self, low=0.0, high=1.0, size=None):
        return self.generator.uniform(low, high, size)


# ---------------------------------------------------------------------------
# Scenario configuration
# ---------------------------------------------------------------------------

_DB3 = 10.0 ** 0.3  # 3 dB in linear scale


@dataclass(frozen=True)
class ScenarioConfig:
    """All physical constants, geometry, and budgets for one scenario.

    Powers are Watts, distances meters, Rician factors linear.  ``rho0`` is
    the path gain at 1 m; the reference-style defaults below are configuration,
    not ground truth.
    """

    n_t: int = 6  # BS antennas
    num_ihr: int = 4  # legitimate information-harvesting receivers
    num_uehr: int = 3  # untrusted energy-harvesting receivers
    m_ris: int = 10  # reflecting elements
    altitude: float = 100.0
    alpha: float = 2.5  # path-loss exponent
    rho0: float = 1e-3  # reference path gain at 1 m (-30 dB)
    sigma2: float = 1e-3  # noise power
    k_factor_bs: float = _DB3
    k_factor_ihr: float = _DB3
    k_factor_uehr: float = _DB3
    p_max: float = 0.01  # 10 dBm
    p0: float = 1.0  # circuit power
    varrho: float = 1.25  # reciprocal amplifier drain efficiency
    nu: float = 0.01  # CSI error radius for harvester channels
    e_h: float = 0.005  # minimum harvested DC power across harvesters
    eh_model: EhModel = field(default_factory=EhModel.default_calibrated)
    region: UavRegion = UavRegion(975.0, 1025.0, -25.0, 25.0)
    codebook: PhaseCodebook = PhaseCodebook(8)
    bs_pos: Position2D = Position2D(0.0, 0.0)
    ihr_pos: tuple[Position2D, ...] = ()
    uehr_pos: tuple[Position2D, ...] = ()
    uav_start: Position2D | None = None
    # Disks the receivers are scattered in when an episode redraws placement.
    ihr_disk_center: Position2D = Position2D(1000.0, 0.0)
    ihr_disk_radius: float = 500.0
    uehr_disk_center: Position2D = Position2D(1000.0, 0.0)
    uehr_disk_radius: float = 500.0

    def __post_init__(self):
        self.validate()

    def validate(self):
        if self.n_t < self.num_ihr:
            raise ConfigError(
                f"zero-forcing needs n_t >= number of users ({self.n_t} < {self.num_ihr})"
            )
        if self.num_ihr < 1:
            raise ConfigError("need at least one user")
        if self.alpha < 2.0:
            raise ConfigError(f"path-loss exponent must be >= 2, got {self.alpha}")
        if min(self.rho0, self.sigma2, self.p0) <= 0:
            raise ConfigError("rho0, sigma2 and p0 must be positive")
        if min(self.p_max, self.nu, self.e_h) < 0:
            raise ConfigError("p_max, nu and e_h must be non-negative")
        if self.varrho < 1.0:
            raise ConfigError(f"amplifier inefficiency must be >= 1, got {self.varrho}")
        if min(self.k_factor_bs, self.k_factor_ihr, self.k_factor_uehr) < 0:
            raise ConfigError("Rician factors must be non-negative")
        if self.e_h >= self.eh_model.saturation:
            raise ConfigError(
                f"harvest target {self.e_h} unreachable: saturation is {self.eh_model.saturation}"
            )
        if self.ihr_pos and len(self.ihr_pos) != self.num_ihr:
            raise ConfigError("ihr_pos length disagrees with num_ihr")
        if self.uehr_pos and len(self.uehr_pos) != self.num_uehr:
            raise ConfigError("uehr_pos length disagrees with num_uehr")

    @property
    def start(self) -> Position2D:
        return self.uav_start if self.uav_start is not None else self.region.center

    def with_positions(self, ihr_pos, uehr_pos) -> "ScenarioConfig":
        return replace(self, ihr_pos=tuple(ihr_pos), uehr_pos=tuple(uehr_pos))


def sample_disk_positions(
    center: Position2D, radius: float, count: int, rng: RngStream
) -> tuple[Position2D, ...]:
    """Uniformly scatter ``count`` points in a disk (area-uniform)."""
    r = radius * np.sqrt(rng.uniform(size=count))
    phi = rng.uniform(0.0, 2.0 * math.pi, size=count)
    return tuple(
        Position2D(center.x + ri * math.cos(pi), center.y + ri * math.sin(pi))
        for ri, pi in zip(r, phi)
    )


# ---------------------------------------------------------------------------
# Small-scale fading
# ---------------------------------------------------------------------------

_PURE_LOS_FACTOR = 1e12  # Rician factors at or above this collapse to pure LoS


def mix_rician(k_factor: float, los: np.ndarray, scattered: np.ndarray) -> np.ndarray:
    """Rician mixture sqrt(K/(K+1)) los + sqrt(1/(K+1)) scattered."""
    if k_factor >= _PURE_LOS_FACTOR:
        return los.copy()
    return math.sqrt(k_factor / (k_factor + 1.0)) * los + math.sqrt(
        1.0 / (k_factor + 1.0)
    ) * scattered


def sample_rician_vector(k_factor: float, los: np.ndarray, rng: RngStream) -> np.ndarray:
    """One draw of a Rician fading vector around the given LoS response.

    Every element has unit second moment: K/(K+1) from the deterministic
    part plus 1/(K+1) from the CN(0,1) scattered part.
    """
    if k_factor < 0:
        raise ValueError("Rician factor must be non-negative")
    return mix_rician(k_factor, los, rng.complex_normal(los.shape))


def perturb_uehr_csi(u: np.ndarray, nu: float, rng: RngStream) -> np.ndarray:
    """Estimated channel u_hat = u + delta with ||delta|| <= nu.

    The error is uniform in the complex l2-ball: a normalized Gaussian
    direction scaled by nu * U^(1/(2n)), the radius law that makes the draw
    volume-uniform in the 2n real dimensions.
    """
    if nu < 0:
        raise ValueError("uncertainty radius must be non-negative")
    if nu == 0.0:
        return u.copy()
    return u + sample_csi_error(u.shape[0], nu, rng)


def sample_csi_error(n: int, nu: float, rng: RngStream) -> np.ndarray:
    """Uniform draw from the complex l2-ball of radius nu in C^n."""
    if nu == 0.0:
        return np.zeros(n, dtype=complex)
    direction = rng.complex_normal(n)
    norm = np.linalg.norm(direction)
    while norm == 0.0:  # pragma: no cover - probability zero
        direction = rng.complex_normal(n)
        norm = np.linalg.norm(direction)
    radius = nu * float(rng.uniform()) ** (1.0 / (2 * n))
    return direction / norm * radius


@dataclass(frozen=True)
class SmallScaleDraw:
    """Episode-frozen randomness: scattered fading, direct links, CSI error."""

    bs_ris: np.ndarray  # (M, N_t) CN(0,1) scattered part of the BS->RIS matrix
    ihr: np.ndarray  # (K, M) scattered parts of RIS->user vectors
    uehr: np.ndarray  # (J, M) scattered parts of RIS->harvester vectors
    direct: np.ndarray  # (J, N_t) CN(0,1) raw BS->harvester fading
    csi_error: np.ndarray  # (J, N_t) cascaded-channel error, row norms <= nu


def sample_small_scale(cfg: ScenarioConfig, rng: RngStream) -> SmallScaleDraw:
    """Draw all episode randomness from per-entity substreams."""
    bs_ris = rng.child("bs-ris").complex_normal((cfg.m_ris, cfg.n_t))
    ihr = np.stack(
        [rng.child(f"ihr-{k}").complex_normal(cfg.m_ris) for k in range(cfg.num_ihr)]
    ) if cfg.num_ihr else np.zeros((0, cfg.m_ris), dtype=complex)
    uehr = np.stack(
        [rng.child(f"uehr-{j}").complex_normal(cfg.m_ris) for j in range(cfg.num_uehr)]
    ) if cfg.num_uehr else np.zeros((0, cfg.m_ris), dtype=complex)
    direct = np.stack(
        [rng.child(f"direct-{j}").complex_normal(cfg.n_t) for j in range(cfg.num_uehr)]
    ) if cfg.num_uehr else np.zeros((0, cfg.n_t), dtype=complex)
    csi_error = np.stack(
        [
            sample_csi_error(cfg.n_t, cfg.nu, rng.child(f"csi-{j}"))
            for j in range(cfg.num_uehr)
        ]
    ) if cfg.num_uehr else np.zeros((0, cfg.n_t), dtype=complex)
    return SmallScaleDraw(bs_ris=bs_ris, ihr=ihr, uehr=uehr, direct=direct, csi_error=csi_error)


# ---------------------------------------------------------------------------
# Channel realization
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class ChannelRealization:
    """One fully composed draw of every channel plus derived quantities."""

    q: Position2D
    theta: np.ndarray  # (M,) reflection phases
    g_bs_ris: np.ndarray  # (M, N_t) BS -> RIS
    g_ihr: np.ndarray  # (K, M) RIS -> user k
    h_uehr: np.ndarray  # (J, M) RIS -> harvester j
    h_direct: np.ndarray  # (J, N_t) BS -> harvester j
    h_cascade: np.ndarray  # (N_t, K) cascaded BS->RIS->user channels
    u: np.ndarray  # (J, N_t) true cascaded harvester channels
    u_hat: np.ndarray  # (J, N_t) estimated harvester channels

    @property
    def reflection(self) -> np.ndarray:
        return np.diag(np.exp(1j * self.theta))


def small_scale_mixtures(
    cfg: ScenarioConfig, q: Position2D, draw: SmallScaleDraw
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Rician mixtures (no path loss) at the steering angles seen from ``q``.

    Returns (bs_ris (M, N_t), ihr (K, M), uehr (J, M)).  The BS-side array
    response uses a half-wavelength ULA of n_t elements, mirroring the RIS
    convention.
    """
    phi_b = azimuth(q, cfg.bs_pos)
    los_bs = np.outer(
        steering_vector(cfg.m_ris, phi_b), steering_vector(cfg.n_t, phi_b).conj()
    )
    g_bs = mix_rician(cfg.k_factor_bs, los_bs, draw.bs_ris)
    ihr = np.stack(
        [
            mix_rician(
                cfg.k_factor_ihr,
                steering_vector(cfg.m_ris, azimuth(q, pos)),
                draw.ihr[k],
            )
            for k, pos in enumerate(cfg.ihr_pos)
        ]
    ) if cfg.num_ihr else draw.ihr
    uehr = np.stack(
        [
            mix_rician(
                cfg.k_factor_uehr,
                steering_vector(cfg.m_ris, azimuth(q, pos)),
                draw.uehr[j],
            )
            for j, pos in enumerate(cfg.uehr_pos)
        ]
    ) if cfg.num_uehr else draw.uehr
    return g_bs, ihr, uehr


def compose_channels(
    cfg: ScenarioConfig, q: Position2D, theta: np.ndarray, draw: SmallScaleDraw
) -> ChannelRealization:
    """Deterministically assemble a realization from a frozen fading draw.

    Large-scale gains use the 3-D distances from the UAV position; the
    estimated harvester channels add the frozen cascaded-channel error on
    top of the true cascaded channel at the current phases.
    """
    if len(cfg.ihr_pos) != cfg.num_ihr or len(cfg.uehr_pos) != cfg.num_uehr:
        raise ConfigError("scenario has no concrete receiver positions")
    theta = np.asarray(theta, dtype=float)
    if theta.shape != (cfg.m_ris,):
        raise ConfigError(f"theta must have shape ({cfg.m_ris},), got {theta.shape}")

    g_bs_small, ihr_small, uehr_small = small_scale_mixtures(cfg, q, draw)

    d_b = distance3d(q, cfg.bs_pos, cfg.altitude)
    g_bs_ris = math.sqrt(cfg.rho0 * d_b ** (-cfg.alpha)) * g_bs_small

    g_ihr = np.stack(
        [
            math.sqrt(cfg.rho0 * distance3d(q, pos, cfg.altitude) ** (-cfg.alpha))
            * ihr_small[k]
            for k, pos in enumerate(cfg.ihr_pos)
        ]
    ) if cfg.num_ihr else ihr_small
    h_uehr = np.stack(
        [
            math.sqrt(cfg.rho0 * distance3d(q, pos, cfg.altitude) ** (-cfg.alpha))
            * uehr_small[j]
            for j, pos in enumerate(cfg.uehr_pos)
        ]
    ) if cfg.num_uehr else uehr_small

    h_direct = np.stack(
        [
            math.sqrt(cfg.rho0 * _ground_distance(cfg.bs_pos, pos) ** (-cfg.alpha))
            * draw.direct[j]
            for j, pos in enumerate(cfg.uehr_pos)
        ]
    ) if cfg.num_uehr else draw.direct

    phases = np.exp(1j * theta)
    # h_c,k = G_b^H Theta^H g_k  and  u_j = h_bj + G_b^H Theta^H h_j.
    reflect_h = g_bs_ris.conj().T * phases.conj()[None, :]  # G_b^H Theta^H, (N_t, M)
    h_cascade = (
        reflect_h @ g_ihr.T if cfg.num_ihr else np.zeros((cfg.n_t, 0), dtype=complex)
    )
    u = h_direct + (reflect_h @ h_uehr.T).T if cfg.num_uehr else h_direct
    u_hat = u + draw.csi_error

    return ChannelRealization(
        q=q,
        theta=theta,
        g_bs_ris=g_bs_ris,
        g_ihr=g_ihr,
        h_uehr=h_uehr,
        h_direct=h_direct,
        h_cascade=h_cascade,
        u=u,
        u_hat=u_hat,
    )


def _ground_distance(a: Position2D, b: Position2D) -> float:
    d = math.hypot(a.x - b.x, a.y - b.y)
    if d <= 0.0:
        raise ConfigError("BS and harvester positions coincide")
    return d


def sample_channels(
    cfg: ScenarioConfig, q: Position2D, theta: np.ndarray, rng: RngStream
) -> ChannelRealization:
    """One fresh scenario draw: fading, direct links and CSI error included."""
    if not cfg.region.contains(q, tol=1e-9):
        raise ConfigError(f"UAV position ({q.x}, {q.y}) outside the hover region")
    return compose_channels(cfg, q, theta, sample_small_scale(cfg, rng))


# ---------------------------------------------------------------------------
# Serialization (regression fixtures)
# ---------------------------------------------------------------------------

_MAGIC = b"WCRZ"
_VERSION = 1


def _write_complex(buf: io.BufferedIOBase, arr: np.ndarray):
    inter = np.empty(arr.size * 2, dtype="<f8")
    inter[0::2] = arr.real.ravel()
    inter[1::2] = arr.imag.ravel()
    buf.write(inter.tobytes())


def _read_complex(buf: io.BufferedIOBase, shape) -> np.ndarray:
    count = int(np.prod(shape)) * 2
    inter = np.frombuffer(buf.read(count * 8), dtype="<f8")
    return (inter[0::2] + 1j * inter[1::2]).reshape(shape)


def save_realization(realization: ChannelRealization, path):
    """Binary dump: magic, version, dims header, then little-endian f64 pairs.

    Arrays are written in a fixed order (g_bs_ris, g_ihr, h_uehr, h_direct,
    h_cascade, u, u_hat) with interleaved real/imaginary parts, preceded by
    the phase vector and UAV position.
    """
    m, n_t = realization.g_bs_ris.shape
    k = realization.g_ihr.shape[0]
    j = realization.h_uehr.shape[0]
    with open(path, "wb") as f:
        f.write(_MAGIC)
        f.write(struct.pack("<5i", _VERSION, m, n_t, k, j))
        f.write(struct.pack("<2d", realization.q.x, realization.q.y))
        f.write(np.asarray(realization.theta, dtype="<f8").tobytes())
        for arr in (
            realization.g_bs_ris,
            realization.g_ihr,
            realization.h_uehr,
            realization.h_direct,
            realization.h_cascade,
            realization.u,
            realization.u_hat,
        ):
            _write_complex(f, arr)


def load_realization(path) -> ChannelRealization:
    """Inverse of :func:`save_realization`; exact round trip."""
    with open(path, "rb") as f:
        if f.read(4) != _MAGIC:
            raise ValueError(f"{path} is not a channel realization dump")
        version, m, n_t, k, j = struct.unpack("<5i", f.read(20))
        if version != _VERSION:
            raise ValueError(f"unsupported dump version {version}")
        qx, qy = struct.unpack("<2d", f.read(16))
        theta = np.frombuffer(f.read(8 * m), dtype="<f8").copy()
        g_bs_ris = _read_complex(f, (m, n_t))
        g_ihr = _read_complex(f, (k, m))
        h_uehr = _read_complex(f, (j, m))
        h_direct = _read_complex(f, (j, n_t))
        h_cascade = _read_complex(f, (n_t, k))
        u = _read_complex(f, (j, n_t))
        u_hat = _read_complex(f, (j, n_t))
    return ChannelRealization(
        q=Position2D(qx, qy),
        theta=theta,
        g_bs_ris=g_bs_ris,
        g_ihr=g_ihr,
        h_uehr=h_uehr,
        h_direct=h_direct,
        h_cascade=h_cascade,
        u=u,
        u_hat=u_hat,
    )
