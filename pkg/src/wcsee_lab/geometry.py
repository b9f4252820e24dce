"""Deterministic geometry for a UAV-mounted reflecting surface.

Lengths are in meters and angles in radians throughout.  The reflecting
surface is modeled as a uniform linear array (ULA) aligned with the x axis
at half-wavelength element spacing, so the per-element steering phase
toward azimuth ``phi`` is ``-pi * m * sin(phi)`` and the carrier
wavelength never appears explicitly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np


class DegenerateGeometryError(ValueError):
    """Raised when an azimuth is requested between coincident points."""


@dataclass(frozen=True)
class Position2D:
    """Horizontal ground-plane coordinates in meters."""

    x: float
    y: float

    def __post_init__(self):
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"position must be finite, got ({self.x}, {self.y})")

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y], dtype=float)


@dataclass(frozen=True)
class UavRegion:
    """Axis-aligned rectangle the UAV is allowed to hover in."""

    x_min: float
    x_max: float
    y_min: float
    y_max: float

    def __post_init__(self):
        if self.x_min > self.x_max or self.y_min > self.y_max:
            raise ValueError(
                f"empty region [{self.x_min}, {self.x_max}] x [{self.y_min}, {self.y_max}]"
            )

    @property
    def center(self) -> Position2D:
        return Position2D(0.5 * (self.x_min + self.x_max), 0.5 * (self.y_min + self.y_max))

    def contains(self, q: Position2D, tol: float = 0.0) -> bool:
        return (
            self.x_min - tol <= q.x <= self.x_max + tol
            and self.y_min - tol <= q.y <= self.y_max + tol
        )


@dataclass(frozen=True)
class PhaseCodebook:
    """Uniform discrete phase alphabet {2*pi*i / 2**bits : i = 0..2**bits - 1}."""

    bits: int

    def __post_init__(self):
        if self.bits < 1:
            raise ValueError(f"codebook needs at least 1 bit, got {self.bits}")

    @property
    def size(self) -> int:
        return 1 << self.bits

    @property
    def step(self) -> float:
        return 2.0 * math.pi / self.size

    def phases(self) -> np.ndarray:
        return np.arange(self.size) * self.step


def distance3d(q: Position2D, w: Position2D, altitude: float) -> float:
    """3-D distance between an aerial node at (q, altitude) and a ground node at w.

    Always at least ``altitude`` and symmetric in the two horizontal points.
    """
    if altitude < 0:
        raise ValueError(f"altitude must be non-negative, got {altitude}")
    return math.hypot(q.x - w.x, q.y - w.y, altitude)


def steering_vector(m_elements: int, phi: float) -> np.ndarray:
    """ULA array response at azimuth ``phi`` for ``m_elements`` elements.

    Element m (0-based) equals exp(-1j * pi * m * sin(phi)); the leading
    element is exactly 1 and all entries have unit modulus.
    """
    if m_elements < 1:
        raise ValueError(f"need at least one element, got {m_elements}")
    m = np.arange(m_elements)
    return np.exp(-1j * math.pi * m * math.sin(phi))


def azimuth(origin: Position2D, target: Position2D) -> float:
    """Four-quadrant azimuth of the vector from ``origin`` to ``target``.

    Returned in (-pi, pi] per ``atan2`` convention.  The plain arctan of the
    coordinate ratio is ill-defined across quadrants; the steering phase only
    depends on sin of the angle, which the four-quadrant form fixes
    consistently.
    """
    dx = target.x - origin.x
    dy = target.y - origin.y
    if dx == 0.0 and dy == 0.0:
        raise DegenerateGeometryError("azimuth undefined for coincident points")
    return math.atan2(dy, dx)


def quantize_phase(theta: float, codebook: PhaseCodebook) -> float:
    """Snap ``theta`` to the nearest codebook phase under the circular metric.

    Ties are broken toward the smaller codebook index; input is reduced
    modulo 2*pi first, so values just below 2*pi wrap around to 0.
    """
    size = codebook.size
    x = (theta % (2.0 * math.pi)) / codebook.step
    # ceil(x - 1/2) rounds halves down, i.e. toward the smaller index.
    idx = int(math.ceil(x - 0.5)) % size
    return idx * codebook.step


def quantize_phases(thetas: np.ndarray, codebook: PhaseCodebook) -> np.ndarray:
    """Vectorized :func:`quantize_phase`."""
    size = codebook.size
    x = np.mod(np.asarray(thetas, dtype=float), 2.0 * math.pi) / codebook.step
    idx = np.ceil(x - 0.5).astype(int) % size
    return idx * codebook.step


def project_uav(q: Position2D, region: UavRegion) -> Position2D:
    """Componentwise clamp of ``q`` onto the hover region (idempotent)."""
    return Position2D(
        min(max(q.x, region.x_min), region.x_max),
        min(max(q.y, region.y_min), region.y_max),
    )
