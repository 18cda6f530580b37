"""Physical parameter sets for the single-track vehicle model.

All defaults describe a representative mid-size sedan. Nothing in the
numeric code hard-codes these values; they flow in through the config
file (see :mod:`lpvtrack.config`).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError

#: Minimum longitudinal speed for which the slip formulas are evaluated [m/s].
V_MIN = 0.5


@dataclass(frozen=True)
class TireParams:
    """Stiffness, friction and geometry of one (lumped) tire."""

    c_kappa: float = 80_000.0  # longitudinal stiffness [N / unit slip]
    c_alpha: float = 60_000.0  # cornering stiffness [N/rad]
    mu: float = 1.0            # road-tire friction coefficient [-]
    r_e: float = 0.30          # effective rolling radius [m]

    def validate(self):
        if not self.c_kappa > 0.0:
            raise ConfigError(f"c_kappa must be > 0, got {self.c_kappa}")
        if not self.c_alpha > 0.0:
            raise ConfigError(f"c_alpha must be > 0, got {self.c_alpha}")
        if not 0.0 < self.mu <= 1.5:
            raise ConfigError(f"mu must be in (0, 1.5], got {self.mu}")
        if not self.r_e > 0.0:
            raise ConfigError(f"r_e must be > 0, got {self.r_e}")


@dataclass(frozen=True)
class VehicleParams:
    """Mass, geometry and resistance coefficients of the vehicle."""

    m: float = 1600.0        # mass [kg]
    i_zz: float = 2500.0     # yaw inertia [kg m^2]
    i_wy: float = 40.0       # axle spin inertia, wheels plus reflected
                             # driveline (motor rotor through the gear
                             # reduction) [kg m^2]
    ell_f: float = 1.2       # CG to front axle [m]
    ell_r: float = 1.4       # CG to rear axle [m]
    h_cg: float = 0.55       # CG height [m]
    tire: TireParams = field(default_factory=TireParams)
    rho_cda: float = 0.40    # lumped drag coefficient rho*Cd*A [kg/m]
    f_r: float = 0.012       # rolling-resistance coefficient [-]
    g: float = 9.81          # gravity [m/s^2]

    def validate(self):
        for name in ("m", "i_zz", "i_wy", "ell_f", "ell_r", "h_cg", "rho_cda", "f_r", "g"):
            value = getattr(self, name)
            if not value > 0.0:
                raise ConfigError(f"{name} must be > 0, got {value}")
        if not self.ell_f + self.ell_r > 0.0:
            raise ConfigError("wheelbase ell_f + ell_r must be > 0")
        self.tire.validate()

    @property
    def weight(self) -> float:
        """Total vehicle weight m*g [N]."""
        return self.m * self.g

    @property
    def wheelbase(self) -> float:
        return self.ell_f + self.ell_r

    def static_axle_loads(self) -> tuple[float, float]:
        """Front/rear axle loads at rest, ignoring resistive forces [N]."""
        w = self.weight
        return w * self.ell_r / self.wheelbase, w * self.ell_f / self.wheelbase


@dataclass
class VehicleState:
    """The eight state variables of the single-track model."""

    v: float = 0.0         # longitudinal speed [m/s]
    u: float = 0.0         # lateral speed [m/s]
    r: float = 0.0         # yaw rate [rad/s]
    omega_wf: float = 0.0  # front wheel speed [rad/s]
    omega_wr: float = 0.0  # rear wheel speed [rad/s]
    x: float = 0.0         # inertial longitudinal position [m]
    y: float = 0.0         # inertial lateral position [m]
    psi: float = 0.0       # yaw angle [rad]

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.v, self.u, self.r, self.omega_wf, self.omega_wr,
             self.x, self.y, self.psi]
        )

    @classmethod
    def from_array(cls, arr) -> "VehicleState":
        arr = np.asarray(arr, dtype=float)
        return cls(*(float(a) for a in arr[:8]))

    @classmethod
    def rolling(cls, speed: float, params: VehicleParams) -> "VehicleState":
        """Straight pure-rolling state at the given speed."""
        omega = speed / params.tire.r_e
        return cls(v=speed, omega_wf=omega, omega_wr=omega)


@dataclass
class VehicleInput:
    """Steering angle and wheel torques."""

    delta_f: float = 0.0  # front steering angle [rad]
    tau_wf: float = 0.0   # front wheel torque [N m]
    tau_wr: float = 0.0   # rear wheel torque [N m]

    def as_array(self) -> np.ndarray:
        return np.array([self.delta_f, self.tau_wf, self.tau_wr])

    @classmethod
    def from_array(cls, arr) -> "VehicleInput":
        arr = np.asarray(arr, dtype=float)
        return cls(*(float(a) for a in arr[:3]))


# State / input vector component indices, shared across the package.
IV, IU, IR, IWF, IWR, IX, IY, IPSI = range(8)
IDELTA, ITAUF, ITAUR = range(3)

# Saturation-channel indices within the sigma/h vectors.
SNF, SNR, SFXF, SFXR, SFYF, SFYR = range(6)
SIGMA_CHANNELS = ("N_f", "N_r", "F_xf", "F_xr", "F_yf", "F_yr")
