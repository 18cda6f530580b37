"""Run configuration: an INI file with units spelled out in key names.

The config file is the single source of truth for every physical
parameter and pipeline setting; nothing numeric is hard-coded in the
command-line driver. :func:`load_config` parses and validates a file
into a :class:`RunConfig`; :func:`canonical_text` re-serializes it in a
deterministic canonical form (stable key order, 17 significant digits),
so that parse -> serialize is a fixed point usable for byte-level
comparisons.
"""
from __future__ import annotations

import configparser
import io
from dataclasses import dataclass, field

from .errors import ConfigError
from .params import TireParams, VehicleParams
from .simulate import (
    BLOWUP_BOUND, STEERING_LIMIT, TORQUE_LIMIT, ManeuverSpec,
)

_SYNTHESIS_MODES = ("contractivity", "dstab")


@dataclass
class LinearizationConfig:
    sample_every: int = 10         # Jacobian sampling stride on the time grid
    fd_step: float = 1e-6          # central finite-difference step scale
    parameter_count: int = 6       # ranked entries kept time-varying

    def validate(self):
        if self.sample_every < 1:
            raise ConfigError(f"sample_every must be >= 1, got {self.sample_every}")
        if not 0.0 < self.fd_step < 1e-2:
            raise ConfigError(f"fd_step must be in (0, 1e-2), got {self.fd_step}")
        if not 0 <= self.parameter_count <= 10:
            raise ConfigError(
                f"parameter_count must be in [0, 10], got {self.parameter_count}")


@dataclass
class SynthesisConfig:
    mode: str = "dstab"            # contractivity | dstab
    contractivity_beta: float = 2.0
    strip_min: float = -40.0       # leftmost eigenvalue real part [1/s]
    strip_max: float = -2.0        # rightmost eigenvalue real part [1/s]
    certification_margin: float = 1e-6

    def validate(self):
        if self.mode not in _SYNTHESIS_MODES:
            raise ConfigError(
                f"mode must be one of {_SYNTHESIS_MODES}, got {self.mode!r}")
        if not self.contractivity_beta > 0.0:
            raise ConfigError(
                f"contractivity_beta must be > 0, got {self.contractivity_beta}")
        if not self.strip_min < self.strip_max < 0.0:
            raise ConfigError(
                f"need strip_min < strip_max < 0, got "
                f"{self.strip_min}, {self.strip_max}")
        if self.certification_margin < 0.0:
            raise ConfigError("certification_margin must be >= 0")


@dataclass
class SimulationConfig:
    steering_limit: float = STEERING_LIMIT  # [rad]
    torque_limit: float = TORQUE_LIMIT      # [N m]
    blowup_bound: float = BLOWUP_BOUND

    def validate(self):
        for name in ("steering_limit", "torque_limit", "blowup_bound"):
            if not getattr(self, name) > 0.0:
                raise ConfigError(f"{name} must be > 0")


@dataclass
class SweepConfig:
    dv_min: float = -0.8     # [m/s]
    dv_max: float = 0.8
    du_min: float = -0.8
    du_max: float = 0.8
    resolution: float = 0.05

    def validate(self):
        if not (self.dv_min <= 0.0 <= self.dv_max
                and self.du_min <= 0.0 <= self.du_max):
            raise ConfigError("sweep ranges must contain the origin")
        if not self.resolution > 0.0:
            raise ConfigError(f"resolution must be > 0, got {self.resolution}")

    def dv_values(self):
        return _grid(self.dv_min, self.dv_max, self.resolution)

    def du_values(self):
        return _grid(self.du_min, self.du_max, self.resolution)


def _grid(lo, hi, step):
    import numpy as np
    n = int(round((hi - lo) / step))
    return lo + step * np.arange(n + 1)


@dataclass
class RunConfig:
    vehicle: VehicleParams = field(default_factory=VehicleParams)
    maneuver: ManeuverSpec = field(default_factory=ManeuverSpec)
    linearization: LinearizationConfig = field(default_factory=LinearizationConfig)
    synthesis: SynthesisConfig = field(default_factory=SynthesisConfig)
    simulation: SimulationConfig = field(default_factory=SimulationConfig)
    sweep: SweepConfig = field(default_factory=SweepConfig)

    def validate(self):
        self.vehicle.validate()
        if not self.maneuver.speed > 0.0:
            raise ConfigError("maneuver speed must be > 0")
        if not self.maneuver.dt > 0.0:
            raise ConfigError("maneuver time step must be > 0")
        if not self.maneuver.duration >= self.maneuver.dt:
            raise ConfigError("maneuver duration must cover one step")
        self.linearization.validate()
        self.synthesis.validate()
        self.simulation.validate()
        self.sweep.validate()


# (section, key, getter path, setter path) — the one place the file
# schema is defined. Keys carry their units.
_VEHICLE_KEYS = (
    ("mass_kg", "m"),
    ("yaw_inertia_kgm2", "i_zz"),
    ("wheel_inertia_kgm2", "i_wy"),
    ("cg_to_front_axle_m", "ell_f"),
    ("cg_to_rear_axle_m", "ell_r"),
    ("cg_height_m", "h_cg"),
    ("drag_area_kg_per_m", "rho_cda"),
    ("rolling_resistance_coeff", "f_r"),
    ("gravity_m_per_s2", "g"),
)
_TIRE_KEYS = (
    ("slip_stiffness_n", "c_kappa"),
    ("cornering_stiffness_n_per_rad", "c_alpha"),
    ("friction_coeff", "mu"),
    ("wheel_radius_m", "r_e"),
)
_MANEUVER_KEYS = (
    ("initial_speed_m_per_s", "speed"),
    ("steering_amplitude_rad", "steering_amplitude"),
    ("steering_period_s", "steering_period"),
    ("duration_s", "duration"),
    ("time_step_s", "dt"),
    ("lateral_target_m", "lateral_target"),
    ("lateral_band", "lateral_band"),
    ("front_torque_nm", "front_torque"),
    ("rear_torque_nm", "rear_torque"),
)
_LINEARIZATION_KEYS = (
    ("sample_every", "sample_every"),
    ("fd_step", "fd_step"),
    ("parameter_count", "parameter_count"),
)
_SYNTHESIS_KEYS = (
    ("mode", "mode"),
    ("contractivity_beta_per_s", "contractivity_beta"),
    ("strip_min_per_s", "strip_min"),
    ("strip_max_per_s", "strip_max"),
    ("certification_margin", "certification_margin"),
)
_SIMULATION_KEYS = (
    ("steering_limit_rad", "steering_limit"),
    ("torque_limit_nm", "torque_limit"),
    ("blowup_bound", "blowup_bound"),
)
_SWEEP_KEYS = (
    ("dv_min_m_per_s", "dv_min"),
    ("dv_max_m_per_s", "dv_max"),
    ("du_min_m_per_s", "du_min"),
    ("du_max_m_per_s", "du_max"),
    ("resolution_m_per_s", "resolution"),
)

_INT_KEYS = {"sample_every", "parameter_count"}
_STR_KEYS = {"mode"}


def _read_section(parser, name, keys, defaults):
    if name not in parser:
        return dict(defaults)
    section = parser[name]
    out = dict(defaults)
    known = {k for k, _ in keys}
    for key in section:
        if key not in known:
            raise ConfigError(f"unknown key {key!r} in section [{name}]")
    for key, attr in keys:
        if key not in section:
            continue
        raw = section[key]
        try:
            if key in _STR_KEYS:
                out[attr] = raw.strip()
            elif key in _INT_KEYS:
                out[attr] = int(raw)
            else:
                out[attr] = float(raw)
        except ValueError as exc:
            raise ConfigError(f"bad value for [{name}] {key}: {raw!r}") from exc
    return out


def load_config(path) -> RunConfig:
    """Parse and validate a config file. Raises ConfigError on any problem."""
    parser = configparser.ConfigParser(interpolation=None)
    try:
        with open(path) as fh:
            parser.read_file(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config file {path}: {exc}") from exc
    except configparser.Error as exc:
        raise ConfigError(f"malformed config file {path}: {exc}") from exc

    known = {"vehicle", "tire", "maneuver", "linearization", "synthesis",
             "simulation", "sweep"}
    for section in parser.sections():
        if section not in known:
            raise ConfigError(f"unknown section [{section}]")

    vehicle_kw = _read_section(parser, "vehicle", _VEHICLE_KEYS, {})
    tire_kw = _read_section(parser, "tire", _TIRE_KEYS, {})
    maneuver_kw = _read_section(parser, "maneuver", _MANEUVER_KEYS, {})
    lin_kw = _read_section(parser, "linearization", _LINEARIZATION_KEYS, {})
    syn_kw = _read_section(parser, "synthesis", _SYNTHESIS_KEYS, {})
    sim_kw = _read_section(parser, "simulation", _SIMULATION_KEYS, {})
    sweep_kw = _read_section(parser, "sweep", _SWEEP_KEYS, {})

    cfg = RunConfig(
        vehicle=VehicleParams(tire=TireParams(**tire_kw), **vehicle_kw),
        maneuver=ManeuverSpec(**maneuver_kw),
        linearization=LinearizationConfig(**lin_kw),
        synthesis=SynthesisConfig(**syn_kw),
        simulation=SimulationConfig(**sim_kw),
        sweep=SweepConfig(**sweep_kw),
    )
    cfg.validate()
    return cfg


def _fmt(value):
    if isinstance(value, str):
        return value
    if isinstance(value, int):
        return str(value)
    # repr is the shortest digit string that round-trips exactly
    return repr(float(value))


def canonical_text(cfg: RunConfig) -> str:
    """Deterministic serialization; parse(canonical_text(c)) == c."""
    parser = configparser.ConfigParser(interpolation=None)
    sections = (
        ("vehicle", _VEHICLE_KEYS, cfg.vehicle),
        ("tire", _TIRE_KEYS, cfg.vehicle.tire),
        ("maneuver", _MANEUVER_KEYS, cfg.maneuver),
        ("linearization", _LINEARIZATION_KEYS, cfg.linearization),
        ("synthesis", _SYNTHESIS_KEYS, cfg.synthesis),
        ("simulation", _SIMULATION_KEYS, cfg.simulation),
        ("sweep", _SWEEP_KEYS, cfg.sweep),
    )
    for name, keys, obj in sections:
        parser[name] = {}
        for key, attr in keys:
            value = getattr(obj, attr)
            if key in _INT_KEYS:
                value = int(value)
            parser[name][key] = _fmt(value)
    buf = io.StringIO()
    parser.write(buf)
    return buf.getvalue()


def save_config(cfg: RunConfig, path):
    with open(path, "w") as fh:
        fh.write(canonical_text(cfg))
