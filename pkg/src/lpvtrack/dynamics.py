"""Nonlinear single-track vehicle dynamics with saturating tire forces.

The model is implicit: the saturated loads and tire forces (the sigma
vector) depend on the longitudinal acceleration, which itself depends
on the forces. The derivative is written as

    xdot = g(x, u) + B_sigma(u) @ sigma(h)

with h the vector of saturation inputs; :func:`resolve_algebraic_loop`
finds the fixed point by successive substitution.

All array-level helpers broadcast over a leading batch shape so that a
sweep of simulations can be advanced in lockstep.
"""
from __future__ import annotations

import numpy as np

from .errors import DegenerateSpeed, LoopDiverged, SingularGeometry
from .params import (
    IDELTA, IPSI, IR, ITAUF, ITAUR, IU, IV, IWF, IWR, IX, IY,
    SFXF, SFXR, SFYF, SFYR, SNF, SNR, V_MIN,
    VehicleInput, VehicleParams, VehicleState,
)
from .tires import _logistic, circle_saturate, slip_arrays, unsaturated_forces

LOOP_TOL = 1e-10
LOOP_MAX_ITER = 100
_LOOP_DAMPING = 0.8


def aero_drag(v, params: VehicleParams):
    """Quadratic aerodynamic drag 0.5 * rho*Cd*A * v|v| [N]."""
    v = np.asarray(v, dtype=float)
    return 0.5 * params.rho_cda * v * np.abs(v)


def resistive_forces(state, n_f, n_r, params: VehicleParams):
    """Aerodynamic drag and per-axle rolling resistance (F_aero, R_xf, R_xr)."""
    state = np.asarray(state, dtype=float) if not isinstance(state, VehicleState) \
        else state.as_array()
    return (
        aero_drag(state[..., IV], params),
        params.f_r * np.asarray(n_f, dtype=float),
        params.f_r * np.asarray(n_r, dtype=float),
    )


def axle_load_solve(vdot, state, inp, params: VehicleParams):
    """Unsaturated axle loads (N_f_hat, N_r_hat) for a given v-dot.

    Solves the quasi-static vertical/pitch balance together with the
    longitudinal force balance, which cancels the tire-force terms: the
    loads depend on the dynamics only through v-dot, drag and the
    rolling resistance (itself proportional to the loads, hence the
    linear solve). The pair always sums to the total weight.
    """
    state = np.asarray(state, dtype=float)
    inp = np.asarray(inp, dtype=float)
    vdot = np.asarray(vdot, dtype=float)
    p = params
    cos_d = np.cos(inp[..., IDELTA])
    # front/rear load coefficients of the pitch-balance row
    a_f = p.ell_f + 2.0 * p.f_r * p.tire.r_e * cos_d
    a_r = 2.0 * p.f_r * p.tire.r_e - p.ell_r
    den = a_f - a_r
    if np.any(np.abs(den) < 1e-12):
        raise SingularGeometry("axle-load system is singular (zero wheelbase)")
    rhs = -p.h_cg * (
        p.m * (vdot - state[..., IR] * state[..., IU])
        + aero_drag(state[..., IV], p)
    )
    n_f = (rhs - a_r * p.weight) / den
    return n_f, p.weight - n_f


def normal_forces(state, vdot, forces, inp, params: VehicleParams):
    """Convenience wrapper around :func:`axle_load_solve`.

    ``forces`` is accepted for interface symmetry but does not enter the
    solution: eliminating the pitch-balance tire terms through the
    longitudinal equation of motion leaves only v-dot and the resistive
    forces.
    """
    del forces
    state = state.as_array() if isinstance(state, VehicleState) else state
    inp = inp.as_array() if isinstance(inp, VehicleInput) else inp
    return axle_load_solve(vdot, state, inp, params)


def explicit_part(state, inp, params: VehicleParams):
    """The sigma-free part g(x, u) of the five dynamic state derivatives."""
    state = np.asarray(state, dtype=float)
    inp = np.asarray(inp, dtype=float)
    batch = np.broadcast_shapes(state.shape[:-1], inp.shape[:-1])
    g = np.zeros(batch + (5,))
    g[..., 0] = state[..., IR] * state[..., IU] \
        - aero_drag(state[..., IV], params) / params.m
    g[..., 1] = -state[..., IR] * state[..., IV]
    g[..., 3] = inp[..., ITAUF] / params.i_wy
    g[..., 4] = inp[..., ITAUR] / params.i_wy
    return g


def bsigma_matrix(inp, params: VehicleParams):
    """Input matrix of the sigma vector, shape (..., 5, 6).

    Columns follow the channel order (N_f, N_r, F_xf, F_xr, F_yf, F_yr).
    The front-wheel columns rotate with the steering angle; the load
    columns carry the rolling-resistance contributions.
    """
    inp = np.asarray(inp, dtype=float)
    delta = inp[..., IDELTA]
    cos_d, sin_d = np.cos(delta), np.sin(delta)
    p = params
    b = np.zeros(delta.shape + (5, 6))
    two_m = 2.0 / p.m
    b[..., 0, SNF] = -two_m * p.f_r * cos_d
    b[..., 0, SNR] = -two_m * p.f_r
    b[..., 0, SFXF] = two_m * cos_d
    b[..., 0, SFXR] = two_m
    b[..., 0, SFYF] = -two_m * sin_d
    b[..., 1, SNF] = -two_m * p.f_r * sin_d
    b[..., 1, SFXF] = two_m * sin_d
    b[..., 1, SFYF] = two_m * cos_d
    b[..., 1, SFYR] = two_m
    two_lf = 2.0 * p.ell_f / p.i_zz
    b[..., 2, SNF] = -two_lf * p.f_r * sin_d
    b[..., 2, SFXF] = two_lf * sin_d
    b[..., 2, SFYF] = two_lf * cos_d
    b[..., 2, SFYR] = -2.0 * p.ell_r / p.i_zz
    b[..., 3, SFXF] = -2.0 * p.tire.r_e / p.i_wy
    b[..., 4, SFXR] = -2.0 * p.tire.r_e / p.i_wy
    return b


def _vdot_from_sigma(state, inp, sigma, params: VehicleParams):
    """Longitudinal acceleration, the only derivative the loop feeds back."""
    p = params
    delta = inp[..., IDELTA]
    cos_d, sin_d = np.cos(delta), np.sin(delta)
    force_sum = (
        cos_d * sigma[..., SFXF] + sigma[..., SFXR]
        - sin_d * sigma[..., SFYF]
        - p.f_r * (cos_d * sigma[..., SNF] + sigma[..., SNR])
    )
    return state[..., IR] * state[..., IU] \
        + (2.0 * force_sum - aero_drag(state[..., IV], p)) / p.m


def h_and_sigma(vdot, state, inp, params: VehicleParams, smooth: bool = False,
                slips=None):
    """Saturation inputs h and outputs sigma for a given v-dot.

    The unsaturated loads feed the (saturated) loads, which feed the
    unsaturated tire forces; the circle saturation then yields the force
    channels. ``smooth=True`` replaces every saturation by the identity,
    giving the smoothed model variant used by the linearization oracles.
    ``slips`` may carry a precomputed (kappa, alpha) pair of front/rear
    stacks so that fixed-point iterations (where the state is frozen)
    skip the slip computation.
    """
    state = np.asarray(state, dtype=float)
    inp = np.asarray(inp, dtype=float)
    nf_hat, nr_hat = axle_load_solve(vdot, state, inp, params)
    # the two axles share every formula: stack them on a trailing axis
    n_hat = np.stack([nf_hat, nr_hat], axis=-1)
    if smooth:
        n = n_hat
    else:
        n = _logistic(n_hat, params.weight, 0.0)

    if slips is None:
        kf, kr, af, ar = slip_arrays(state, inp, params)
        kappa = np.stack([kf, kr], axis=-1)
        alpha = np.stack([af, ar], axis=-1)
    else:
        kappa, alpha = slips
    fx_hat, fy_hat = unsaturated_forces(params.tire, n, kappa, alpha)

    h = np.concatenate([n_hat, fx_hat, fy_hat], axis=-1)
    if smooth:
        return h, h.copy()
    fx, fy = circle_saturate(fx_hat, fy_hat, params.tire.mu, n)
    sigma = np.concatenate([n, fx, fy], axis=-1)
    return h, sigma


def sigma_inputs(state, inp, vdot_guess, sigma, params: VehicleParams):
    """The h vector (saturation-function inputs) at a candidate v-dot.

    ``sigma`` is part of the formal signature of h but the nesting used
    here routes every sigma dependency through v-dot, so it is unused.
    """
    del sigma
    state = state.as_array() if isinstance(state, VehicleState) else state
    inp = inp.as_array() if isinstance(inp, VehicleInput) else inp
    h, _ = h_and_sigma(vdot_guess, state, inp, params)
    return h


def initial_sigma(params: VehicleParams, batch=()):
    """Cold-start sigma guess: static axle loads, zero tire forces."""
    sigma = np.zeros(batch + (6,))
    nf0, nr0 = params.static_axle_loads()
    sigma[..., SNF] = nf0
    sigma[..., SNR] = nr0
    return sigma


def resolve_batch(state, inp, params: VehicleParams, sigma0=None,
                  tol: float = LOOP_TOL, max_iter: int = LOOP_MAX_ITER,
                  smooth: bool = False):
    """Fixed-point resolution of the saturation loop over a batch.

    Returns ``(xdot, sigma, h, iterations, converged, residual)`` where
    ``xdot`` has the full 8 state components, ``iterations`` counts
    substitution steps per batch element and ``converged`` flags the
    elements whose residual dropped below ``tol``. Non-finite iterates
    are left frozen and reported as unconverged. Successive substitution
    is damped (by 0.8) for any element whose residual grew in the
    previous step.
    """
    state = np.asarray(state, dtype=float)
    inp = np.asarray(inp, dtype=float)
    batch = np.broadcast_shapes(state.shape[:-1], inp.shape[:-1])
    if sigma0 is None:
        sigma = initial_sigma(params, batch)
    else:
        sigma = np.array(np.broadcast_to(np.asarray(sigma0, float), batch + (6,)))

    prev_res = np.full(batch, np.inf)
    last_res = np.full(batch, np.inf)
    iters = np.zeros(batch, dtype=int)
    converged = np.zeros(batch, dtype=bool)
    usable = np.ones(batch, dtype=bool)
    h = np.zeros(batch + (6,))

    # the slips depend only on the frozen state: compute them once
    kf, kr, af, ar = slip_arrays(state, inp, params)
    slips = (np.stack([kf, kr], axis=-1), np.stack([af, ar], axis=-1))

    for k in range(max_iter):
        vdot = _vdot_from_sigma(state, inp, sigma, params)
        h_new, sigma_new = h_and_sigma(vdot, state, inp, params, smooth, slips)
        delta = sigma_new - sigma
        res = np.max(np.abs(delta), axis=-1)
        finite = np.isfinite(res)
        usable &= finite | converged

        active = usable & ~converged
        last_res = np.where(active, res, last_res)
        hit = active & (res < tol)
        iters = np.where(hit, k + 1, iters)
        converged |= hit

        update = active & finite
        step = np.where(res > prev_res, _LOOP_DAMPING, 1.0)
        sigma = np.where(update[..., None], sigma + step[..., None] * delta, sigma)
        h = np.where(update[..., None] | hit[..., None], h_new, h)
        prev_res = np.where(update, res, prev_res)
        if not np.any(usable & ~converged):
            break

    vdot = _vdot_from_sigma(state, inp, sigma, params)
    xdot = np.zeros(batch + (8,))
    g = explicit_part(state, inp, params)
    xdot[..., :5] = g + np.einsum("...ij,...j->...i", bsigma_matrix(inp, params), sigma)
    v, u, psi = state[..., IV], state[..., IU], state[..., IPSI]
    xdot[..., IX] = v * np.cos(psi) - u * np.sin(psi)
    xdot[..., IY] = u * np.cos(psi) + v * np.sin(psi)
    xdot[..., IPSI] = state[..., IR]
    iters = np.where(converged, iters, max_iter)
    return xdot, sigma, h, iters, converged & usable, last_res


def resolve_algebraic_loop(state, inp, params: VehicleParams,
                           tol: float = LOOP_TOL, max_iter: int = LOOP_MAX_ITER,
                           sigma0=None, smooth: bool = False):
    """Converged (xdot, sigma, h) triple for a single operating point.

    Raises :class:`LoopDiverged` if the residual never drops below
    ``tol`` and :class:`DegenerateSpeed` below the slip-speed guard.
    """
    arr = state.as_array() if isinstance(state, VehicleState) else np.asarray(state, float)
    uarr = inp.as_array() if isinstance(inp, VehicleInput) else np.asarray(inp, float)
    if arr[IV] < V_MIN:
        raise DegenerateSpeed(f"v = {arr[IV]} m/s below the {V_MIN} m/s guard")
    xdot, sigma, h, iters, converged, residual = resolve_batch(
        arr, uarr, params, sigma0=sigma0, tol=tol, max_iter=max_iter, smooth=smooth)
    if not bool(np.all(converged)):
        raise LoopDiverged(float(np.max(residual)), max_iter)
    return xdot, sigma, h


def state_derivative(state, inp, params: VehicleParams, sigma0=None):
    """Full 8-component state derivative at a resolvable operating point."""
    xdot, _, _ = resolve_algebraic_loop(state, inp, params, sigma0=sigma0)
    return xdot
