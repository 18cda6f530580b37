"""Full pipeline: linearize, build the polytope, solve the LMIs, track.

This is the expensive demo — the 256-vertex semidefinite program takes a
few minutes. Pass ``--cheap`` to shrink the problem (a shorter maneuver
and a single ranked parameter, 8 vertices) for a quick run.

Run from the repository root:

    python3 demos/03_synthesize_and_track.py [--cheap] [output-dir]
"""
import pathlib
import sys
import time

import numpy as np

from lpvtrack import (
    CvxpyBackend, ManeuverSpec, VehicleParams, certify_gain, dstab_lmi,
    generate_reference, polytope_from_reference, simulate_closed_loop,
    solve_feasibility, vertical_strip_region,
)
from lpvtrack.params import IU, IV
from lpvtrack.simulate import STEERING_LIMIT, TORQUE_LIMIT, trace_to_csv

args = [a for a in sys.argv[1:] if a != "--cheap"]
CHEAP = "--cheap" in sys.argv[1:]
OUT = pathlib.Path(args[0] if args else "demo_out")
OUT.mkdir(parents=True, exist_ok=True)

params = VehicleParams()
if CHEAP:
    spec = ManeuverSpec(steering_amplitude=0.02, steering_period=0.8,
                        duration=1.0, dt=2e-3, lateral_target=0.0)
    sample_every, count = 50, 1
else:
    spec = ManeuverSpec(steering_amplitude=0.019032085732402584)
    sample_every, count = 10, 6

print("Synthesis demo" + (" (cheap mode)" if CHEAP else ""))
t0 = time.perf_counter()
ref = generate_reference(spec, params)
poly, sectors, times, _, _ = polytope_from_reference(
    ref, params, sample_every=sample_every, count=count)
print(f"  reference + linearization: {time.perf_counter() - t0:.1f} s, "
      f"{poly.n_vertices} polytope vertices")

# Eigenvalue strip: every closed-loop vertex eigenvalue must land in
# (-40, -2) 1/s — fast enough to track, slow enough for real actuators.
region = vertical_strip_region(lambda_max=-2.0, lambda_min=-40.0)
problem = dstab_lmi(poly.vertex_systems(), region)
weights = np.array([1.0 / STEERING_LIMIT,
                    1.0 / TORQUE_LIMIT, 1.0 / TORQUE_LIMIT])
t0 = time.perf_counter()
result = solve_feasibility(problem, CvxpyBackend(row_weights=weights))
print(f"  LMI solve: {time.perf_counter() - t0:.1f} s, "
      f"feasible = {result.feasible}")
if not result.feasible:
    sys.exit("  no common gain exists for this vertex family")

report = certify_gain(result.gain, poly.vertex_systems(), region, margin=1e-6)
print(f"  certification: every vertex in the strip = {report.passed}, "
      f"worst abscissa {report.worst_abscissa():.2f} 1/s")
np.savetxt(OUT / "gain.csv", result.gain, delimiter=",")
print(f"  wrote {OUT / 'gain.csv'}")

# Track the reference from a perturbed start: +0.3 m/s on both speed
# components.
offset = np.zeros(8)
offset[IV] = offset[IU] = 0.3
trace = simulate_closed_loop(result.gain, ref, offset, params)
trace_to_csv(trace, OUT / "tracking_trace.csv")
print(f"  closed loop from (dv, du) = (0.3, 0.3) m/s: "
      f"{'diverged' if trace.diverged else 'converged'}")
print(f"  terminal position error {trace.terminal_position_error():.4f} m, "
      f"velocity error {trace.terminal_velocity_error():.4f} m/s")
print(f"  wrote {OUT / 'tracking_trace.csv'}")
