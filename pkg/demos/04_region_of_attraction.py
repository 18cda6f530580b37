"""Empirical region of attraction of a synthesized tracking gain.

Sweeps a grid of initial speed offsets (dv0, du0), simulates the full
nonlinear closed loop from each one, and maps which offsets still
converge back to the reference. Needs a gain file from demo 03 (or from
``lpvtrack synthesize``).

Run from the repository root:

    python3 demos/03_synthesize_and_track.py demo_out
    python3 demos/04_region_of_attraction.py demo_out/gain.csv [output-dir]
"""
import pathlib
import sys
import time

import numpy as np

from lpvtrack import (
    ManeuverSpec, VehicleParams, generate_reference,
    region_of_attraction_sweep,
)
from lpvtrack.simulate import sweep_to_csv

if len(sys.argv) < 2:
    sys.exit(__doc__)
gain = np.loadtxt(sys.argv[1], delimiter=",")
OUT = pathlib.Path(sys.argv[2] if len(sys.argv) > 2 else "demo_out")
OUT.mkdir(parents=True, exist_ok=True)

params = VehicleParams()
spec = ManeuverSpec(steering_amplitude=0.019032085732402584)
ref = generate_reference(spec, params)

grid = np.arange(-4, 5) * 0.2   # +-0.8 m/s in 0.2 m/s steps
print("Region-of-attraction demo")
print(f"  sweeping {len(grid)}x{len(grid)} initial offsets "
      f"over [{grid[0]:.1f}, {grid[-1]:.1f}] m/s")
t0 = time.perf_counter()
sweep = region_of_attraction_sweep(gain, ref, grid, grid, params)
print(f"  {np.sum(sweep.converged)} of {sweep.converged.size} points "
      f"converged in {time.perf_counter() - t0:.1f} s")
dv_half, du_half = sweep.converged_box()
print(f"  converged box half-widths: |dv0| <= {dv_half:.2f} m/s, "
      f"|du0| <= {du_half:.2f} m/s")

sweep_to_csv(sweep, OUT / "sweep.csv")
print(f"  wrote {OUT / 'sweep.csv'}")

# ASCII map: rows are dv0 (top = positive), columns du0.
print("  convergence map (# converged, . diverged):")
for i in range(len(grid) - 1, -1, -1):
    row = "".join("#" if c else "." for c in sweep.converged[i])
    print(f"    dv0={grid[i]:+.1f}  {row}")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit(0)

fig, ax = plt.subplots(figsize=(5, 4))
ax.pcolormesh(grid, grid, sweep.converged.T, shading="nearest",
              cmap="RdYlGn", vmin=0, vmax=1)
ax.set_xlabel("dv0 [m/s]")
ax.set_ylabel("du0 [m/s]")
ax.set_title("converged initial offsets")
fig.tight_layout()
fig.savefig(OUT / "sweep.png", dpi=120)
print(f"  wrote {OUT / 'sweep.png'}")
