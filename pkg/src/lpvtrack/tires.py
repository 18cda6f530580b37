"""Combined-slip tire forces with friction-circle saturation.

The unsaturated forces are linear in the slips, with load- and
slip-dependent effective stiffnesses (a Dugoff-style model). Saturation
is a smooth logistic squashed to the friction circle of radius mu*N:
the longitudinal force is bounded first, the lateral force then takes
the remaining circle budget.

All functions broadcast over numpy arrays; scalars in give scalars out.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DegenerateSpeed, InvalidBounds, NonpositiveLoad
from .params import (
    IDELTA, IR, IU, IV, IWF, IWR, V_MIN,
    TireParams, VehicleInput, VehicleParams, VehicleState,
)

# Exponent clip keeping exp() finite in deep saturation.
_EXP_CLIP = 60.0
# Loads below this fraction of the circle radius produce zero force.
_LOAD_EPS = 1e-9
# Smallest bound width the logistic treats as open; 4/width must not overflow.
_WIDTH_EPS = 1e-300


@dataclass
class SlipState:
    """Front/rear slip ratios and slip angles."""

    kappa_f: float
    kappa_r: float
    alpha_f: float
    alpha_r: float


@dataclass
class TireForceSet:
    """Saturated tire forces and their unsaturated counterparts [N]."""

    F_xf: float = 0.0
    F_xr: float = 0.0
    F_yf: float = 0.0
    F_yr: float = 0.0
    F_xf_hat: float = 0.0
    F_xr_hat: float = 0.0
    F_yf_hat: float = 0.0
    F_yr_hat: float = 0.0


def slip_arrays(state, inp, params: VehicleParams):
    """Slip quantities from raw state/input arrays (broadcasting).

    Returns (kappa_f, kappa_r, alpha_f, alpha_r). The caller is
    responsible for the v >= V_MIN guard; speeds below it give garbage.
    """
    state = np.asarray(state, dtype=float)
    inp = np.asarray(inp, dtype=float)
    v = state[..., IV]
    u = state[..., IU]
    r = state[..., IR]
    delta = inp[..., IDELTA]
    re = params.tire.r_e

    v_front = v * np.cos(delta) + (u + params.ell_f * r) * np.sin(delta)
    kappa_f = -(v_front - state[..., IWF] * re) / v_front
    kappa_r = -(v - state[..., IWR] * re) / v
    alpha_f = delta - np.arctan((u + params.ell_f * r) / v)
    alpha_r = -np.arctan((u - params.ell_r * r) / v)
    return kappa_f, kappa_r, alpha_f, alpha_r


def slip_quantities(state: VehicleState, inp: VehicleInput,
                    params: VehicleParams) -> SlipState:
    """Front/rear slip ratio and slip angle at the given operating point."""
    if state.v < V_MIN:
        raise DegenerateSpeed(f"v = {state.v} m/s below the {V_MIN} m/s guard")
    kf, kr, af, ar = slip_arrays(state.as_array(), inp.as_array(), params)
    return SlipState(float(kf), float(kr), float(af), float(ar))


def star_coefficients(tire: TireParams, load):
    """Slip scales (kappa_star, alpha_star) at which saturation sets in."""
    load = np.asarray(load, dtype=float)
    if np.any(load <= 0.0):
        raise NonpositiveLoad(f"normal load must be > 0, got {load}")
    return _star(tire, load)


def _star(tire: TireParams, load):
    nmu = load * tire.mu
    ck = tire.c_kappa
    kappa_star = nmu * (4.0 * ck + np.sqrt(nmu * nmu + 8.0 * ck * nmu) + nmu) \
        / (8.0 * ck * ck)
    alpha_star = nmu / (2.0 * tire.c_alpha)
    return kappa_star, alpha_star


def effective_stiffness(tire: TireParams, load, kappa, alpha):
    """Varying coefficients (c_star_kappa, c_star_alpha).

    Multiplying them by the slip ratio / slip angle gives the
    unsaturated longitudinal / lateral force.
    """
    load = np.asarray(load, dtype=float)
    if np.any(load <= 0.0):
        raise NonpositiveLoad(f"normal load must be > 0, got {load}")
    return _stiffness(tire, load, np.asarray(kappa, float), np.asarray(alpha, float))


def _stiffness(tire: TireParams, load, kappa, alpha):
    ck, ca, mu = tire.c_kappa, tire.c_alpha, tire.mu
    nmu = load * mu
    kappa_star, alpha_star = _star(tire, load)

    tan_a2 = np.tan(alpha) ** 2
    den_k = 4.0 * ca * ca * tan_a2 + 4.0 * ck * ck * kappa_star ** 2
    c_star_kappa = load * ck * mu * (
        4.0 * np.sqrt(ca * ca * tan_a2 + ck * ck * kappa_star ** 2)
        + nmu * (kappa_star - 1.0)
    ) / den_k

    den_a = 4.0 * alpha_star ** 2 * ca * ca + 4.0 * ck * ck * kappa ** 2
    c_star_alpha = load * ca * mu * (
        4.0 * np.sqrt(alpha_star ** 2 * ca * ca + ck * ck * kappa ** 2)
        + nmu * (kappa - 1.0)
    ) / den_a
    return c_star_kappa, c_star_alpha


def unsaturated_forces(tire: TireParams, load, kappa, alpha):
    """Force pair (F_x_hat, F_y_hat) before saturation; zero at zero load."""
    load = np.asarray(load, dtype=float)
    kappa = np.asarray(kappa, dtype=float)
    alpha = np.asarray(alpha, dtype=float)
    safe_load = np.where(load > _LOAD_EPS, load, 1.0)
    ck, ca = _stiffness(tire, safe_load, kappa, alpha)
    fx = np.where(load > _LOAD_EPS, ck * kappa, 0.0)
    fy = np.where(load > _LOAD_EPS, ca * alpha, 0.0)
    return fx, fy


def logistic(x, upper, lower, uncentered: bool = False):
    """Smooth saturation of x to (lower, upper).

    Centered so that the midpoint of the bounds is a fixed point with
    unit slope. ``uncentered=True`` keeps the uncorrected centering term
    (u - l)/2, kept only for comparison; it does not map the midpoint to
    itself unless lower == 0.
    """
    x = np.asarray(x, dtype=float)
    upper = np.asarray(upper, dtype=float)
    lower = np.asarray(lower, dtype=float)
    if np.any(upper <= lower):
        raise InvalidBounds(f"need upper > lower, got {upper} <= {lower}")
    return _logistic(x, upper, lower, uncentered)


def _logistic(x, upper, lower, uncentered=False):
    width = upper - lower
    center = (upper - lower) / 2.0 if uncentered else (upper + lower) / 2.0
    # Widths below this make 4/width overflow; treat them as collapsed.
    open_bounds = width > _WIDTH_EPS
    safe_width = np.where(open_bounds, width, 1.0)
    z = -4.0 / safe_width * (x - center)
    z = np.minimum(np.maximum(z, -_EXP_CLIP), _EXP_CLIP)
    out = width / (1.0 + np.exp(z)) + lower
    # The addition can round one ulp past a bound in deep saturation.
    out = np.minimum(np.maximum(out, lower), upper)
    # Collapsed bounds (zero load) pin the output to the midpoint.
    return np.where(open_bounds, out, (upper + lower) / 2.0)


def circle_saturate(fx_hat, fy_hat, mu, load):
    """Squash one wheel's force pair onto the friction circle mu*load.

    The longitudinal force is bounded to +-mu*N first; the lateral
    force then gets the remaining radius sqrt((mu N)^2 - F_x^2).
    """
    radius = np.asarray(mu * np.asarray(load, float), dtype=float)
    radius = np.maximum(radius, 0.0)
    fx = _logistic(np.asarray(fx_hat, float), radius, -radius)
    lateral_budget = np.sqrt(np.maximum(radius * radius - fx * fx, 0.0))
    fy = _logistic(np.asarray(fy_hat, float), lateral_budget, -lateral_budget)
    return fx, fy


def saturate_forces(unsat: TireForceSet, mu, n_f, n_r) -> TireForceSet:
    """Apply per-wheel friction-circle saturation to an unsaturated set."""
    if n_f < 0.0 or n_r < 0.0:
        raise NonpositiveLoad(f"normal loads must be >= 0, got {n_f}, {n_r}")
    fxf, fyf = circle_saturate(unsat.F_xf_hat, unsat.F_yf_hat, mu, n_f)
    fxr, fyr = circle_saturate(unsat.F_xr_hat, unsat.F_yr_hat, mu, n_r)
    return TireForceSet(
        F_xf=float(fxf), F_xr=float(fxr), F_yf=float(fyf), F_yr=float(fyr),
        F_xf_hat=unsat.F_xf_hat, F_xr_hat=unsat.F_xr_hat,
        F_yf_hat=unsat.F_yf_hat, F_yr_hat=unsat.F_yr_hat,
    )
