"""Tour of the tire force model.

Walks through the three layers of the force computation — slip-dependent
effective stiffness, unsaturated forces, and friction-circle saturation —
and writes a curve file plus (when matplotlib is available) a figure.

Run from the repository root:

    python3 demos/01_tire_model.py [output-dir]
"""
import csv
import pathlib
import sys

import numpy as np

from lpvtrack import TireParams, circle_saturate, unsaturated_forces
from lpvtrack.tires import star_coefficients

OUT = pathlib.Path(sys.argv[1] if len(sys.argv) > 1 else "demo_out")
OUT.mkdir(parents=True, exist_ok=True)

tire = TireParams()
load = 5000.0  # one axle of a ~1.6 t car [N]

print("Tire model demo")
print(f"  slip stiffness      {tire.c_kappa:.0f} N")
print(f"  cornering stiffness {tire.c_alpha:.0f} N/rad")
print(f"  friction limit      mu*N = {tire.mu * load:.0f} N at N = {load:.0f} N")

# The slip scales at which saturation sets in for this load.
kappa_star, alpha_star = star_coefficients(tire, load)
print(f"  saturation onsets   kappa* = {kappa_star:.4f}, "
      f"alpha* = {np.rad2deg(alpha_star):.2f} deg")

# Pure longitudinal sweep: the saturated force follows the linear force
# at small slip and flattens onto the friction circle.
kappa = np.linspace(-0.5, 0.5, 401)
fx_hat, fy_hat = unsaturated_forces(tire, load, kappa, 0.0)
fx, fy = circle_saturate(fx_hat, fy_hat, tire.mu, load)

# Combined slip at a fixed 4 degree slip angle: the longitudinal force
# eats into the lateral budget.
alpha = np.deg2rad(4.0)
fx_hat_c, fy_hat_c = unsaturated_forces(tire, load, kappa, alpha)
fx_c, fy_c = circle_saturate(fx_hat_c, fy_hat_c, tire.mu, load)

with open(OUT / "tire_curves.csv", "w", newline="") as fh:
    w = csv.writer(fh)
    w.writerow(["kappa", "fx_pure", "fx_combined", "fy_combined"])
    for row in zip(kappa, fx, fx_c, fy_c):
        w.writerow([f"{v:.10g}" for v in row])
print(f"  wrote {OUT / 'tire_curves.csv'}")

total = np.hypot(fx_c, fy_c)
print(f"  friction circle check: max |F| / (mu N) = "
      f"{np.max(total) / (tire.mu * load):.6f} (never exceeds 1)")

try:
    import matplotlib
    matplotlib.use("Agg")
    import matplotlib.pyplot as plt
except ImportError:
    sys.exit(0)

fig, (ax1, ax2) = plt.subplots(1, 2, figsize=(10, 4))
ax1.plot(kappa, fx / 1e3, label="pure longitudinal")
ax1.plot(kappa, fx_c / 1e3, label="combined (alpha = 4 deg)")
ax1.axhline(tire.mu * load / 1e3, color="gray", ls=":", lw=1)
ax1.axhline(-tire.mu * load / 1e3, color="gray", ls=":", lw=1)
ax1.set_xlabel("slip ratio kappa")
ax1.set_ylabel("F_x [kN]")
ax1.legend()
theta = np.linspace(0, 2 * np.pi, 200)
ax2.plot(tire.mu * load * np.cos(theta) / 1e3,
         tire.mu * load * np.sin(theta) / 1e3, "gray", ls=":")
ax2.plot(fx_c / 1e3, fy_c / 1e3, label="combined-slip locus")
ax2.set_xlabel("F_x [kN]")
ax2.set_ylabel("F_y [kN]")
ax2.set_aspect("equal")
ax2.legend()
fig.tight_layout()
fig.savefig(OUT / "tire_curves.png", dpi=120)
print(f"  wrote {OUT / 'tire_curves.png'}")
