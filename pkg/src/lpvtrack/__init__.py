"""Robust gain-scheduled trajectory tracking for a single-track vehicle.

The pipeline, end to end:

1. :mod:`lpvtrack.tires` / :mod:`lpvtrack.dynamics` — nonlinear
   single-track model with friction-circle-saturated tire forces and an
   algebraic loop in the longitudinal acceleration.
2. :mod:`lpvtrack.simulate` — open-loop reference generation (a
   sinusoidal collision-avoidance steer), closed-loop simulation, and
   region-of-attraction sweeps.
3. :mod:`lpvtrack.linearize` — Jacobians along the reference, sector
   bounds for the saturations, and a polytopic vertex family over the
   dominant time-varying entries.
4. :mod:`lpvtrack.synthesis` — LMI feasibility problems (contractivity
   or an eigenvalue strip) solved at every vertex for one static
   state-feedback gain, plus an independent a-posteriori certification.

:mod:`lpvtrack.cli` exposes the same pipeline as the ``lpvtrack``
command with ``reference``, ``synthesize``, ``simulate`` and ``sweep``
subcommands driven by an INI config (:mod:`lpvtrack.config`).
"""

from .config import RunConfig, canonical_text, load_config, save_config
from .dynamics import (
    resolve_algebraic_loop, resolve_batch, state_derivative,
)
from .errors import (
    ConfigError, Diverged, LoopDiverged, LpvTrackError, ManeuverInfeasible,
)
from .linearize import (
    LinearizedSystem, PolytopicModel, SectorBounds, augment_error_dynamics,
    build_polytope, jacobians_at, linearize_family, polytope_from_reference,
    sector_closed_matrices, sector_slopes, select_varying_parameters,
)
from .params import TireParams, VehicleInput, VehicleParams, VehicleState
from .simulate import (
    ManeuverSpec, ReferenceTrajectory, SimTrace, SweepResult,
    calibrate_steering_amplitude, generate_reference,
    region_of_attraction_sweep, simulate_closed_loop,
)
from .synthesis import (
    CertificationReport, CvxpyBackend, SynthesisResult, certify_gain,
    contractivity_lmi, dstab_lmi, load_gain, save_synthesis,
    solve_feasibility, vertical_strip_region,
)
from .tires import (
    circle_saturate, effective_stiffness, logistic, saturate_forces,
    slip_quantities, star_coefficients, unsaturated_forces,
)

__version__ = "0.1.0"

__all__ = [
    "RunConfig", "canonical_text", "load_config", "save_config",
    "resolve_algebraic_loop", "resolve_batch", "state_derivative",
    "ConfigError", "Diverged", "LoopDiverged", "LpvTrackError",
    "ManeuverInfeasible",
    "LinearizedSystem", "PolytopicModel", "SectorBounds",
    "augment_error_dynamics", "build_polytope", "jacobians_at",
    "linearize_family", "polytope_from_reference", "sector_closed_matrices",
    "sector_slopes", "select_varying_parameters",
    "TireParams", "VehicleInput", "VehicleParams", "VehicleState",
    "ManeuverSpec", "ReferenceTrajectory", "SimTrace", "SweepResult",
    "calibrate_steering_amplitude", "generate_reference",
    "region_of_attraction_sweep", "simulate_closed_loop",
    "CertificationReport", "CvxpyBackend", "SynthesisResult", "certify_gain",
    "contractivity_lmi", "dstab_lmi", "load_gain", "save_synthesis",
    "solve_feasibility", "vertical_strip_region",
    "circle_saturate", "effective_stiffness", "logistic", "saturate_forces",
    "slip_quantities", "star_coefficients", "unsaturated_forces",
]
