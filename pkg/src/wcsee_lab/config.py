"""Experiment specification: flat key=value files with typed validation.

An empty file yields the documented defaults (the reference system
settings and training hyperparameters).  Transmit power is written in dBm and
converted to Watts at this boundary; everything downstream is SI.  Unknown
keys and malformed values fail with the offending line number.
"""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from .channels import ConfigError, ScenarioConfig
from .geometry import PhaseCodebook, Position2D, UavRegion
from .phy_core import EhModel


class ParseError(ValueError):
    """Unreadable config line."""


class ValidationError(ValueError):
    """Readable config with inconsistent or unknown content."""


SWEEP_AXES = ("p_max_dbm", "m_ris", "nu", "batch_size")

MODES = ("train-sac", "train-ddpg", "sca-benchmark", "eval", "sweep")


@dataclass
class ExperimentSpec:
    """Everything a run needs besides the CLI-level seed list and paths."""

    scenario: ScenarioConfig = field(default_factory=ScenarioConfig)
    # Training (defaults follow the reference hyperparameter table).
    episodes: int = 100
    steps_per_episode: int = 200
    warmup_steps: int = 1000
    batch_size: int = 256
    buffer_capacity: int = 100_000
    hidden_width: int = 256
    hidden_layers: int = 2
    lr_actor: float = 1e-4
    lr_critic: float = 1e-3
    lr_temperature: float = 1e-3
    gamma: float = 0.99
    tau: float = 5e-3
    init_temperature: float = 1.0
    grad_steps_per_env_step: float = 1.0
    discrete_phases: bool = True
    redraw_per_episode: bool = True
    eval_episodes: int = 5
    checkpoint: str = ""
    algo: str = "sac"
    # Benchmark.
    sca_realizations: int = 100
    sca_outer_iters: int = 20
    sca_inner_iters: int = 60
    sca_tol: float = 0.01
    sca_outer_tol: float = 1e-3
    # Sweep (overridden by the CLI --sweep flag when given).
    sweep_axis: str = ""
    sweep_values: tuple = ()
    sweep_runner: str = "sca-benchmark"

    @property
    def hidden(self) -> tuple:
        return (self.hidden_width,) * self.hidden_layers


def _parse_scalar(raw: str, kind: type, key: str, lineno: int):
    try:
        if kind is bool:
            lowered = raw.strip().lower()
            if lowered in ("1", "true", "yes", "on"):
                return True
            if lowered in ("0", "false", "no", "off"):
                return False
            raise ValueError(raw)
        return kind(raw)
    except ValueError as exc:
        raise ValidationError(
            f"line {lineno}: value {raw!r} for key {key!r} is not a valid {kind.__name__}"
        ) from exc


# Scenario keys: name -> (attribute, type).  Power in dBm and the Rician
# factors in dB are converted below.
_SCENARIO_KEYS = {
    "n_t": ("n_t", int),
    "num_ihr": ("num_ihr", int),
    "num_uehr": ("num_uehr", int),
    "m_ris": ("m_ris", int),
    "altitude_m": ("altitude", float),
    "alpha": ("alpha", float),
    "rho0": ("rho0", float),
    "sigma2": ("sigma2", float),
    "p0_w": ("p0", float),
    "varrho": ("varrho", float),
    "nu": ("nu", float),
    "e_h_w": ("e_h", float),
}

_SPEC_KEYS = {
    "episodes": int,
    "steps_per_episode": int,
    "warmup_steps": int,
    "batch_size": int,
    "buffer_capacity": int,
    "hidden_width": int,
    "hidden_layers": int,
    "lr_actor": float,
    "lr_critic": float,
    "lr_temperature": float,
    "gamma": float,
    "tau": float,
    "init_temperature": float,
    "grad_steps_per_env_step": float,
    "discrete_phases": bool,
    "redraw_per_episode": bool,
    "eval_episodes": int,
    "checkpoint": str,
    "algo": str,
    "sca_realizations": int,
    "sca_outer_iters": int,
    "sca_inner_iters": int,
    "sca_tol": float,
    "sca_outer_tol": float,
    "sweep_runner": str,
}

_GEOMETRY_KEYS = {
    "p_max_dbm": float,
    "phase_bits": int,
    "k_factor_db": float,
    "region_x_min": float,
    "region_x_max": float,
    "region_y_min": float,
    "region_y_max": float,
    "bs_x": float,
    "bs_y": float,
    "uav_start_x": float,
    "uav_start_y": float,
    "ihr_disk_x": float,
    "ihr_disk_y": float,
    "ihr_disk_radius": float,
    "uehr_disk_x": float,
    "uehr_disk_y": float,
    "uehr_disk_radius": float,
    "eh_b0": float,
    "eh_b1": float,
    "eh_b2": float,
    "eh_k1": float,
}


def dbm_to_watts(dbm: float) -> float:
    return 10.0 ** (dbm / 10.0) / 1000.0


def db_to_linear(db: float) -> float:
    return 10.0 ** (db / 10.0)


def parse_config_text(text: str, source: str = "<config>") -> ExperimentSpec:
    """Parse and validate the flat key=value format."""
    scenario_updates: dict = {}
    geometry: dict = {}
    spec_updates: dict = {}

    for lineno, raw_line in enumerate(text.splitlines(), start=1):
        line = raw_line.strip()
        if not line or line.startswith("#"):
            continue
        if "=" not in line:
            raise ParseError(f"{source}: line {lineno}: expected key=value, got {raw_line!r}")
        key, _, raw = line.partition("=")
        key = key.strip()
        raw = raw.split("#", 1)[0].strip()
        if key in _SCENARIO_KEYS:
            attr, kind = _SCENARIO_KEYS[key]
            scenario_updates[attr] = _parse_scalar(raw, kind, key, lineno)
        elif key in _GEOMETRY_KEYS:
            geometry[key] = _parse_scalar(raw, _GEOMETRY_KEYS[key], key, lineno)
        elif key in _SPEC_KEYS:
            spec_updates[key] = _parse_scalar(raw, _SPEC_KEYS[key], key, lineno)
        else:
            raise ValidationError(f"{source}: line {lineno}: unknown key {key!r}")

    if "p_max_dbm" in geometry:
        scenario_updates["p_max"] = dbm_to_watts(geometry["p_max_dbm"])
    if "phase_bits" in geometry:
        scenario_updates["codebook"] = PhaseCodebook(geometry["phase_bits"])
    if "k_factor_db" in geometry:
        lin = db_to_linear(geometry["k_factor_db"])
        scenario_updates.update(k_factor_bs=lin, k_factor_ihr=lin, k_factor_uehr=lin)
    if any(k.startswith("region_") for k in geometry):
        base = ScenarioConfig().region
        scenario_updates["region"] = UavRegion(
            geometry.get("region_x_min", base.x_min),
            geometry.get("region_x_max", base.x_max),
            geometry.get("region_y_min", base.y_min),
            geometry.get("region_y_max", base.y_max),
        )
    if "bs_x" in geometry or "bs_y" in geometry:
        scenario_updates["bs_pos"] = Position2D(
            geometry.get("bs_x", 0.0), geometry.get("bs_y", 0.0)
        )
    if "uav_start_x" in geometry or "uav_start_y" in geometry:
        scenario_updates["uav_start"] = Position2D(
            geometry.get("uav_start_x", 0.0), geometry.get("uav_start_y", 0.0)
        )
    for prefix, center_attr, radius_attr in (
        ("ihr_disk", "ihr_disk_center", "ihr_disk_radius"),
        ("uehr_disk", "uehr_disk_center", "uehr_disk_radius"),
    ):
        if any(k.startswith(prefix) for k in geometry):
            base_center = getattr(ScenarioConfig(), center_attr)
            scenario_updates[center_attr] = Position2D(
                geometry.get(f"{prefix}_x", base_center.x),
                geometry.get(f"{prefix}_y", base_center.y),
            )
            if f"{prefix}_radius" in geometry:
                scenario_updates[radius_attr] = geometry[f"{prefix}_radius"]
    if any(k.startswith("eh_") for k in geometry):
        scenario_updates["eh_model"] = EhModel.default_calibrated(
            b0=geometry.get("eh_b0", 150.0),
            b1=geometry.get("eh_b1", 0.014),
            b2=geometry.get("eh_b2", 0.024),
            k1=geometry.get("eh_k1", 1.0),
        )

    try:
        scenario = replace(ScenarioConfig(), **scenario_updates)
    except (ConfigError, ValueError) as exc:
        raise ValidationError(f"{source}: {exc}") from exc

    spec = ExperimentSpec(scenario=scenario, **spec_updates)
    if spec.algo not in ("sac", "ddpg"):
        raise ValidationError(f"{source}: algo must be 'sac' or 'ddpg', got {spec.algo!r}")
    if spec.sweep_runner not in ("train-sac", "train-ddpg", "sca-benchmark"):
        raise ValidationError(
            f"{source}: sweep_runner must name a concrete runner, got {spec.sweep_runner!r}"
        )
    for name in ("episodes", "steps_per_episode", "batch_size", "hidden_width"):
        if getattr(spec, name) < 1:
            raise ValidationError(f"{source}: {name} must be at least 1")
    return spec


def load_config(path) -> ExperimentSpec:
    """Read and validate a config file; missing keys take documented defaults."""
    try:
        with open(path, "r", encoding="utf-8") as f:
            text = f.read()
    except OSError as exc:
        raise ParseError(f"cannot read config {path}: {exc}") from exc
    return parse_config_text(text, source=str(path))


def apply_sweep_value(spec: ExperimentSpec, axis: str, value: float) -> ExperimentSpec:
    """Spec copy with one sweep point applied."""
    if axis == "p_max_dbm":
        return replace(spec, scenario=replace(spec.scenario, p_max=dbm_to_watts(value)))
    if axis == "m_ris":
        return replace(spec, scenario=replace(spec.scenario, m_ris=int(value)))
    if axis == "nu":
        return replace(spec, scenario=replace(spec.scenario, nu=value))
    if axis == "batch_size":
        return replace(spec, batch_size=int(value))
    raise ValidationError(f"unknown sweep axis {axis!r}; choose one of {SWEEP_AXES}")
