"""Model-based benchmark: surrogate bounds, the three decision blocks, and
the block-coordinate outer loop."""

from .bcd import BcdResult, OuterRow, bcd_outer
from .coeffs import (
    PhaseCouplings,
    PlacementGains,
    phase_couplings,
    placement_gains,
    placement_harvested,
    placement_user_sinr,
    power_gains,
)
from .power import InfeasibleBlockError, PowerResult, TraceRow, dinkelbach_power, secrecy_floor
from .ris import RisResult, ris_phase_sca, secrecy_value
from .uav import UavResult, min_rate, uav_location_sca

__all__ = [
    "BcdResult",
    "InfeasibleBlockError",
    "OuterRow",
    "PhaseCouplings",
    "PlacementGains",
    "PowerResult",
    "RisResult",
    "TraceRow",
    "UavResult",
    "bcd_outer",
    "dinkelbach_power",
    "min_rate",
    "phase_couplings",
    "placement_gains",
    "placement_harvested",
    "placement_user_sinr",
    "power_gains",
    "ris_phase_sca",
    "secrecy_floor",
    "secrecy_value",
    "uav_location_sca",
]
