"""Reference maneuver generation, closed-loop simulation and the
initial-condition sweep.

The reference maneuver is a smooth left-right steering sweep (one full
sine period) at constant initial speed with zero wheel torque, shaped so
the final lateral displacement hits a configurable target (a double lane
change). Integration is fixed-step classical Runge-Kutta; the saturation
loop is resolved at every stage, warm-started from the previous one.

The closed-loop and sweep paths share a batched integrator: a whole grid
of initial-condition offsets is advanced in lockstep, diverged points
are frozen in place and reported per grid index.
"""
from __future__ import annotations

import csv
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .dynamics import LOOP_MAX_ITER, LOOP_TOL, initial_sigma, resolve_batch
from .errors import LoopDiverged, ManeuverInfeasible
from .params import (
    IDELTA, IPSI, IU, IV, IX, IY,
    VehicleInput, VehicleParams, VehicleState,
)

#: Default actuator limits applied by the closed loop.
STEERING_LIMIT = 0.6     # [rad]
TORQUE_LIMIT = 3000.0    # [N m]
#: Any state component beyond this magnitude counts as blow-up.
BLOWUP_BOUND = 1e4

TRACE_COLUMNS = [
    "t", "v", "u", "r", "omega_wf", "omega_wr", "x", "y", "psi",
    "delta_f", "tau_wf", "tau_wr",
    "x_L", "y_L", "dpsi", "dv", "du", "dr",
]


@dataclass
class ManeuverSpec:
    """Open-loop maneuver description: speed, steering and torque shape."""

    speed: float = 70.0 / 3.6          # initial longitudinal speed [m/s]
    steering_amplitude: float = 0.05   # peak steering angle [rad]
    steering_period: float = 4.0       # full sine period [s]
    duration: float = 6.0              # total horizon [s]
    dt: float = 1e-3                   # integration step [s]
    lateral_target: float = 6.0        # final displacement target [m]
    lateral_band: float = 0.10         # accepted relative miss
    front_torque: float = 0.0          # constant wheel torques [N m]
    rear_torque: float = 0.0

    def steering(self, t):
        """Steering profile: one sine period, then straight."""
        t = np.asarray(t, dtype=float)
        angle = self.steering_amplitude * np.sin(2.0 * np.pi * t / self.steering_period)
        return np.where(t < self.steering_period, angle, 0.0)

    def inputs(self, t):
        """Input vector(s) at time(s) t, shape (..., 3)."""
        delta = self.steering(t)
        out = np.zeros(np.shape(delta) + (3,))
        out[..., 0] = delta
        out[..., 1] = self.front_torque
        out[..., 2] = self.rear_torque
        return out

    def time_grid(self):
        n = int(round(self.duration / self.dt))
        return np.arange(n + 1) * self.dt


@dataclass
class ReferenceTrajectory:
    """Per-sample record of the open-loop reference maneuver."""

    t: np.ndarray          # (n+1,)
    states: np.ndarray     # (n+1, 8)
    inputs: np.ndarray     # (n+1, 3)
    xdots: np.ndarray      # (n+1, 8)
    sigmas: np.ndarray     # (n+1, 6)
    hs: np.ndarray         # (n+1, 6)
    loop_iters: np.ndarray # (n+1,)
    spec: ManeuverSpec

    def __len__(self):
        return len(self.t)

    @property
    def dt(self) -> float:
        return float(self.t[1] - self.t[0])

    def lateral_displacement(self) -> float:
        return float(self.states[-1, IY])

    def peak_heading(self) -> float:
        return float(np.max(np.abs(self.states[:, IPSI])))


@dataclass
class SimTrace:
    """Closed-loop simulation history on the reference grid."""

    t: np.ndarray
    states: np.ndarray       # (n+1, 8)
    inputs: np.ndarray       # (n+1, 3), input held over [t_k, t_k+dt)
    errors: np.ndarray       # (n+1, 8) deviations from the reference
    residuals: np.ndarray    # (n+1,) worst loop residual per step
    diverged: bool
    diverge_step: int | None = None

    def terminal_position_error(self) -> float:
        return float(np.max(np.abs(self.errors[-1, [IX, IY]])))

    def terminal_velocity_error(self) -> float:
        return float(np.max(np.abs(self.errors[-1, [IV, IU]])))

    def peak_torque(self) -> float:
        return float(np.max(np.abs(self.inputs[:, 1:])))


def _rk4_step(states, inputs, params, dt, sigma0, smooth=False, stage1=None):
    """One batched RK4 step; returns (next_states, sigma_warm, ok).

    ``stage1`` may carry an already-resolved (xdot, sigma, ok) triple at
    the step's start point to avoid resolving it twice.
    """
    def f(x, warm):
        xdot, sigma, _, _, conv, _ = resolve_batch(
            x, inputs, params, sigma0=warm, smooth=smooth)
        return xdot, sigma, conv

    k1, s1, c1 = f(states, sigma0) if stage1 is None else stage1
    k2, s2, c2 = f(states + 0.5 * dt * k1, s1)
    k3, s3, c3 = f(states + 0.5 * dt * k2, s2)
    k4, s4, c4 = f(states + dt * k3, s3)
    nxt = states + (dt / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    return nxt, s4, c1 & c2 & c3 & c4


def integrate_step(state, inp, params: VehicleParams, dt: float):
    """Single classical RK4 step of the nonlinear model (zero-order hold)."""
    if dt <= 0.0:
        raise ValueError(f"dt must be > 0, got {dt}")
    arr = state.as_array() if isinstance(state, VehicleState) else np.asarray(state, float)
    uarr = inp.as_array() if isinstance(inp, VehicleInput) else np.asarray(inp, float)
    nxt, _, ok = _rk4_step(arr, uarr, params, dt, None)
    if not bool(np.all(ok)):
        raise LoopDiverged(np.nan, LOOP_MAX_ITER)
    return nxt


def generate_reference(spec: ManeuverSpec, params: VehicleParams,
                       check_band: bool = True) -> ReferenceTrajectory:
    """Open-loop integration of the maneuver, with per-sample loop data."""
    t = spec.time_grid()
    n = len(t) - 1
    states = np.zeros((n + 1, 8))
    inputs = spec.inputs(t)
    xdots = np.zeros((n + 1, 8))
    sigmas = np.zeros((n + 1, 6))
    hs = np.zeros((n + 1, 6))
    iters = np.zeros(n + 1, dtype=int)

    states[0] = VehicleState.rolling(spec.speed, params).as_array()
    warm = None
    for k in range(n + 1):
        xdot, sigma, h, it, conv, _ = resolve_batch(
            states[k], inputs[k], params, sigma0=warm)
        if not bool(np.all(conv)):
            raise ManeuverInfeasible(f"saturation loop failed at t = {t[k]:.3f} s")
        xdots[k], sigmas[k], hs[k], iters[k] = xdot, sigma, h, int(it)
        if k < n:
            nxt, warm, ok = _rk4_step(states[k], inputs[k], params, spec.dt,
                                      sigma, stage1=(xdot, sigma, conv))
            if not bool(np.all(ok)):
                raise ManeuverInfeasible(f"saturation loop failed at t = {t[k]:.3f} s")
            states[k + 1] = nxt

    ref = ReferenceTrajectory(t, states, inputs, xdots, sigmas, hs, iters, spec)
    if check_band and spec.lateral_target != 0.0:
        miss = abs(ref.lateral_displacement() - spec.lateral_target)
        if miss > spec.lateral_band * abs(spec.lateral_target):
            raise ManeuverInfeasible(
                f"final lateral displacement {ref.lateral_displacement():.2f} m "
                f"missed the {spec.lateral_target} m target band")
    return ref


def calibrate_steering_amplitude(spec: ManeuverSpec, params: VehicleParams,
                                 coarse_dt: float = 4e-3) -> float:
    """Amplitude giving the spec's lateral displacement target.

    Displacement is close to linear in the amplitude, so two coarse-step
    secant iterations land well inside the acceptance band.
    """
    from dataclasses import replace

    def displacement(a):
        probe = replace(spec, steering_amplitude=a, dt=coarse_dt)
        return generate_reference(probe, params, check_band=False).lateral_displacement()

    a = spec.steering_amplitude
    target = spec.lateral_target
    for _ in range(4):
        y = displacement(a)
        if abs(y - target) < 0.02 * abs(target):
            break
        a *= target / y
    return a


def _closed_loop(gain, ref: ReferenceTrajectory, offsets, params: VehicleParams,
                 steering_limit: float = STEERING_LIMIT,
                 torque_limit: float = TORQUE_LIMIT,
                 blowup: float = BLOWUP_BOUND,
                 record_trace: bool = False):
    """Batched closed-loop run from `offsets` (..., 8) added at t = 0.

    Returns a dict with terminal errors, divergence flags and (when
    requested) full trace arrays. Diverged batch elements are frozen at
    their last finite state.
    """
    gain = np.asarray(gain, dtype=float)
    offsets = np.asarray(offsets, dtype=float)
    batch = offsets.shape[:-1]
    n = len(ref) - 1
    dt = ref.dt

    states = ref.states[0] + offsets
    warm = np.broadcast_to(initial_sigma(params), batch + (6,)).copy()
    alive = np.ones(batch, dtype=bool)
    diverge_step = np.full(batch, -1, dtype=int)
    peak_torque = np.zeros(batch)
    last_inputs = np.zeros(batch + (3,))

    if record_trace:
        trace_states = np.zeros((n + 1,) + batch + (8,))
        trace_inputs = np.zeros((n + 1,) + batch + (3,))
        trace_residuals = np.zeros((n + 1,) + batch)

    for k in range(n + 1):
        err = states - ref.states[k]
        inputs = ref.inputs[k] + err @ gain.T
        inputs[..., 0] = np.clip(inputs[..., 0], -steering_limit, steering_limit)
        inputs[..., 1:] = np.clip(inputs[..., 1:], -torque_limit, torque_limit)
        inputs = np.where(alive[..., None], inputs, last_inputs)
        last_inputs = inputs
        peak_torque = np.maximum(peak_torque, np.max(np.abs(inputs[..., 1:]), axis=-1))

        stage1 = None
        if record_trace:
            trace_states[k] = states
            trace_inputs[k] = inputs
            xdot, sigma, _, _, conv, res = resolve_batch(
                states, inputs, params, sigma0=warm)
            trace_residuals[k] = np.where(alive, res, np.nan)
            stage1 = (xdot, sigma, conv)

        if k == n:
            break
        nxt, warm_new, ok = _rk4_step(states, inputs, params, dt, warm,
                                      stage1=stage1)
        bad = alive & (~ok | ~np.all(np.isfinite(nxt), axis=-1)
                       | (np.max(np.abs(nxt), axis=-1) > blowup))
        diverge_step = np.where(bad, k, diverge_step)
        alive &= ~bad
        states = np.where(alive[..., None], nxt, states)
        warm = np.where(alive[..., None], warm_new, warm)

    terminal_err = states - ref.states[-1]
    out = {
        "terminal_errors": terminal_err,
        "diverged": ~alive,
        "diverge_step": diverge_step,
        "peak_torque": peak_torque,
    }
    if record_trace:
        out["trace_states"] = trace_states
        out["trace_inputs"] = trace_inputs
        out["trace_residuals"] = trace_residuals
    return out


def simulate_closed_loop(gain, ref: ReferenceTrajectory, x_init_offset,
                         params: VehicleParams,
                         steering_limit: float = STEERING_LIMIT,
                         torque_limit: float = TORQUE_LIMIT,
                         blowup: float = BLOWUP_BOUND) -> SimTrace:
    """Closed-loop tracking run u = u0(t) + K (x - x0(t)) from one offset."""
    offset = np.asarray(x_init_offset, dtype=float).reshape(8)
    run = _closed_loop(gain, ref, offset, params, steering_limit,
                       torque_limit, blowup, record_trace=True)
    errors = run["trace_states"] - ref.states
    step = int(run["diverge_step"])
    return SimTrace(
        t=ref.t,
        states=run["trace_states"],
        inputs=run["trace_inputs"],
        errors=errors,
        residuals=run["trace_residuals"],
        diverged=bool(run["diverged"]),
        diverge_step=step if step >= 0 else None,
    )


@dataclass
class SweepResult:
    """Convergence classification over a (dv0, du0) offset grid."""

    dv_values: np.ndarray
    du_values: np.ndarray
    converged: np.ndarray       # (len(dv), len(du)) bool
    terminal_error: np.ndarray  # worst of position/velocity error ratios
    peak_torque: np.ndarray

    def converged_box(self):
        """Half-widths (max |dv0|, max |du0|) of the converged set."""
        if not np.any(self.converged):
            return 0.0, 0.0
        dv_grid, du_grid = np.meshgrid(self.dv_values, self.du_values, indexing="ij")
        return (float(np.max(np.abs(dv_grid[self.converged]))),
                float(np.max(np.abs(du_grid[self.converged]))))


def region_of_attraction_sweep(gain, ref: ReferenceTrajectory, dv_values, du_values,
                               params: VehicleParams,
                               pos_threshold: float = 0.1,
                               vel_threshold: float = 0.05,
                               steering_limit: float = STEERING_LIMIT,
                               torque_limit: float = TORQUE_LIMIT,
                               threads: int = 1) -> SweepResult:
    """Classify every (dv0, du0) offset as converged or diverged.

    A point converges when the simulation stays finite and the terminal
    position/velocity errors are below the thresholds. Grid points are
    independent; rows of the dv axis are distributed over threads and
    merged by index.
    """
    dv_values = np.asarray(dv_values, dtype=float)
    du_values = np.asarray(du_values, dtype=float)
    offsets = np.zeros((len(dv_values), len(du_values), 8))
    offsets[..., IV] = dv_values[:, None]
    offsets[..., IU] = du_values[None, :]

    def run_rows(chunk):
        return _closed_loop(gain, ref, offsets[chunk], params,
                            steering_limit, torque_limit)

    chunks = np.array_split(np.arange(len(dv_values)), max(1, int(threads)))
    chunks = [c for c in chunks if len(c)]
    if len(chunks) > 1:
        with ThreadPoolExecutor(max_workers=len(chunks)) as pool:
            results = list(pool.map(run_rows, chunks))
    else:
        results = [run_rows(chunks[0])]

    term = np.concatenate([r["terminal_errors"] for r in results], axis=0)
    diverged = np.concatenate([r["diverged"] for r in results], axis=0)
    peak = np.concatenate([r["peak_torque"] for r in results], axis=0)

    pos_err = np.max(np.abs(term[..., [IX, IY]]), axis=-1)
    vel_err = np.max(np.abs(term[..., [IV, IU]]), axis=-1)
    converged = ~diverged & (pos_err < pos_threshold) & (vel_err < vel_threshold)
    severity = np.maximum(pos_err / pos_threshold, vel_err / vel_threshold)
    return SweepResult(dv_values, du_values, converged, severity, peak)


def trace_to_csv(trace: SimTrace, path):
    """Write a SimTrace in the documented column layout."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(TRACE_COLUMNS)
        for k in range(len(trace.t)):
            s, i, e = trace.states[k], trace.inputs[k], trace.errors[k]
            row = [trace.t[k], *s, *i,
                   e[IX], e[IY], e[IPSI], e[IV], e[IU], e[2]]
            writer.writerow(f"{val:.17g}" for val in row)


def reference_to_csv(ref: ReferenceTrajectory, path):
    """Reference trajectory dump: states, inputs, sigma and h channels."""
    header = ["t", "v", "u", "r", "omega_wf", "omega_wr", "x", "y", "psi",
              "delta_f", "tau_wf", "tau_wr",
              "sigma_nf", "sigma_nr", "sigma_fxf", "sigma_fxr",
              "sigma_fyf", "sigma_fyr",
              "h_nf", "h_nr", "h_fxf", "h_fxr", "h_fyf", "h_fyr"]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(header)
        for k in range(len(ref)):
            row = [ref.t[k], *ref.states[k], *ref.inputs[k],
                   *ref.sigmas[k], *ref.hs[k]]
            writer.writerow(f"{val:.17g}" for val in row)


def sweep_to_csv(result: SweepResult, path):
    """Sweep grid dump: dv0, du0, converged flag and terminal error."""
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["dv0", "du0", "converged", "terminal_error"])
        for i, dv in enumerate(result.dv_values):
            for j, du in enumerate(result.du_values):
                writer.writerow([f"{dv:.17g}", f"{du:.17g}",
                                 int(result.converged[i, j]),
                                 f"{result.terminal_error[i, j]:.17g}"])
