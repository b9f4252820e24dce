"""Shared desk-scale scenarios for the test suite.

The reference defaults put receivers a kilometer away with -30 dB
reference gain, which drives every SINR to numerical zero; tests instead
use a desk-scale geometry (meters, normalized reference gain) where rates
are a few bits, harvester channel norms are O(0.1), and the CSI-error radii
of interest are meaningful fractions of the channel norm.
"""

import pytest

from wcsee_lab.channels import ScenarioConfig
from wcsee_lab.geometry import PhaseCodebook, Position2D, UavRegion

_IHR_SPOTS = [(8.0, 1.5), (7.5, -2.0), (9.0, 0.5), (6.5, 2.5), (8.5, -1.0), (7.0, 0.2)]
_UEHR_SPOTS = [(12.0, -1.5), (11.5, 2.0), (13.0, 0.0), (10.5, -2.5)]


def desk_scenario(num_ihr=4, num_uehr=3, n_t=6, m_ris=10, bits=8, **overrides) -> ScenarioConfig:
    base = dict(
        n_t=n_t,
        num_ihr=num_ihr,
        num_uehr=num_uehr,
        m_ris=m_ris,
        altitude=3.0,
        alpha=2.5,
        rho0=1.0,
        sigma2=1e-6,
        p_max=0.1,
        p0=0.5,
        varrho=1.25,
        nu=0.01,
        e_h=1e-6,
        region=UavRegion(5.0, 11.0, -3.0, 3.0),
        codebook=PhaseCodebook(bits),
        bs_pos=Position2D(0.0, 0.0),
        ihr_pos=tuple(Position2D(*xy) for xy in _IHR_SPOTS[:num_ihr]),
        uehr_pos=tuple(Position2D(*xy) for xy in _UEHR_SPOTS[:num_uehr]),
        ihr_disk_center=Position2D(8.0, 0.0),
        ihr_disk_radius=3.0,
        uehr_disk_center=Position2D(12.0, 0.0),
        uehr_disk_radius=2.5,
    )
    base.update(overrides)
    return ScenarioConfig(**base)


@pytest.fixture
def desk_cfg():
    """Factory fixture: desk_cfg(num_ihr=..., **overrides) -> ScenarioConfig."""
    return desk_scenario
