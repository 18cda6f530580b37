"""Command-line driver for the full gain-scheduling pipeline.

Subcommands:

* ``reference``  — integrate the open-loop maneuver, write the trajectory CSV
* ``synthesize`` — linearize, build the polytope, solve the LMIs, certify
* ``simulate``   — closed-loop runs with a stored gain from given offsets
* ``sweep``      — region-of-attraction grid classification

Exit codes: 0 success (including data-producing runs with diverged
simulations), 1 infeasible synthesis or unmet maneuver target, 2 usage
or configuration errors.
"""
from __future__ import annotations

import argparse
import sys

import numpy as np

from .config import RunConfig, canonical_text, load_config
from .errors import LpvTrackError, ConfigError, ManeuverInfeasible
from .linearize import polytope_from_reference
from .params import IPSI, IU, IV, IX, IY
from .simulate import (
    generate_reference, reference_to_csv, region_of_attraction_sweep,
    simulate_closed_loop, sweep_to_csv, trace_to_csv,
)
from .synthesis import (
    certify_gain, contractivity_lmi, dstab_lmi, load_gain, save_synthesis,
    solve_feasibility, vertical_strip_region, CvxpyBackend,
)
from .tires import slip_arrays

EXIT_OK = 0
EXIT_INFEASIBLE = 1
EXIT_USAGE = 2


def _writeline(path, lines):
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def _load(args) -> RunConfig:
    return load_config(args.config)


def _out_dir(args):
    import os
    os.makedirs(args.out, exist_ok=True)
    return args.out


def _reference(cfg: RunConfig):
    return generate_reference(cfg.maneuver, cfg.vehicle,
                              check_band=cfg.maneuver.lateral_target != 0.0)


def cmd_reference(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    ref = _reference(cfg)
    reference_to_csv(ref, f"{out}/reference.csv")
    kf, kr, af, ar = slip_arrays(ref.states, ref.inputs, cfg.vehicle)
    _writeline(f"{out}/reference_summary.txt", [
        "# reference maneuver summary",
        f"samples {len(ref)}",
        f"final_lateral_displacement_m {ref.lateral_displacement():.17g}",
        f"final_speed_m_per_s {ref.states[-1, IV]:.17g}",
        f"peak_heading_rad {ref.peak_heading():.17g}",
        f"peak_slip_ratio {max(np.max(np.abs(kf)), np.max(np.abs(kr))):.17g}",
        f"peak_slip_angle_rad {max(np.max(np.abs(af)), np.max(np.abs(ar))):.17g}",
        f"max_loop_iterations {int(np.max(ref.loop_iters))}",
    ])
    print(f"reference: {len(ref)} samples, "
          f"{ref.lateral_displacement():.3f} m lateral displacement")
    return EXIT_OK


def cmd_synthesize(args) -> int:
    cfg = _load(args)
    if args.mode:
        cfg.synthesis.mode = args.mode
        cfg.synthesis.validate()
    out = _out_dir(args)
    ref = _reference(cfg)

    poly, sectors, times, _, _ = polytope_from_reference(
        ref, cfg.vehicle,
        sample_every=cfg.linearization.sample_every,
        fd_step=cfg.linearization.fd_step,
        count=cfg.linearization.parameter_count,
    )
    poly.to_json(f"{out}/polytope.json")
    sectors.to_csv(f"{out}/sectors.csv")

    vertices = poly.vertex_systems()
    if cfg.synthesis.mode == "dstab":
        region = vertical_strip_region(lambda_max=cfg.synthesis.strip_max,
                                       lambda_min=cfg.synthesis.strip_min)
        problem = dstab_lmi(vertices, region)
    else:
        region = None
        problem = contractivity_lmi(vertices, cfg.synthesis.contractivity_beta)

    weights = np.array([1.0 / cfg.simulation.steering_limit,
                        1.0 / cfg.simulation.torque_limit,
                        1.0 / cfg.simulation.torque_limit])
    result = solve_feasibility(problem, CvxpyBackend(row_weights=weights))
    result.mode = cfg.synthesis.mode

    report = None
    if result.feasible and region is not None:
        report = certify_gain(result.gain, vertices, region,
                              margin=cfg.synthesis.certification_margin)
    save_synthesis(result, report, f"{out}/gain.txt")

    lines = [
        "# synthesis report",
        f"mode {cfg.synthesis.mode}",
        f"vertices {poly.n_vertices}",
        f"feasible {int(result.feasible)}",
        f"worst_residual {result.worst_residual:.17g}",
        f"worst_constraint {result.worst_label}",
    ]
    if report is not None:
        lines += [
            f"certified {int(report.passed)}",
            f"worst_abscissa {report.worst_abscissa():.17g}",
            f"offending_vertices {len(report.offending)}",
        ]
    _writeline(f"{out}/synthesis_report.txt", lines)

    if not result.feasible or (report is not None and not report.passed):
        print(f"synthesis: infeasible (best residual {result.worst_residual:.3e})")
        return EXIT_INFEASIBLE
    print(f"synthesis: certified gain over {poly.n_vertices} vertices "
          f"(worst residual {result.worst_residual:.3e})")
    return EXIT_OK


def _parse_offsets(specs):
    offsets = []
    for spec in specs:
        parts = spec.split(",")
        if len(parts) != 2:
            raise ConfigError(f"offset must be 'dv,du', got {spec!r}")
        try:
            offsets.append((float(parts[0]), float(parts[1])))
        except ValueError as exc:
            raise ConfigError(f"bad offset {spec!r}") from exc
    return offsets or [(0.3, 0.3)]


def cmd_simulate(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    gain = load_gain(args.gain)
    offsets = _parse_offsets(args.offset)
    ref = _reference(cfg)

    lines = ["# closed-loop simulation report"]
    for i, (dv, du) in enumerate(offsets):
        x0 = np.zeros(8)
        x0[IV], x0[IU] = dv, du
        trace = simulate_closed_loop(
            gain, ref, x0, cfg.vehicle,
            steering_limit=cfg.simulation.steering_limit,
            torque_limit=cfg.simulation.torque_limit,
            blowup=cfg.simulation.blowup_bound)
        trace_to_csv(trace, f"{out}/trace_{i}.csv")
        lines += [
            f"offset_{i} dv={dv:.17g} du={du:.17g}",
            f"  diverged {int(trace.diverged)}",
            f"  terminal_position_error_m {trace.terminal_position_error():.17g}",
            f"  terminal_velocity_error_m_per_s {trace.terminal_velocity_error():.17g}",
            f"  peak_torque_nm {trace.peak_torque():.17g}",
        ]
        status = "diverged" if trace.diverged else "converged"
        print(f"simulate offset ({dv}, {du}): {status}, "
              f"terminal position error {trace.terminal_position_error():.4f} m")
    _writeline(f"{out}/simulate_report.txt", lines)
    return EXIT_OK


def cmd_sweep(args) -> int:
    cfg = _load(args)
    out = _out_dir(args)
    gain = load_gain(args.gain)
    ref = _reference(cfg)
    sweep = region_of_attraction_sweep(
        gain, ref, cfg.sweep.dv_values(), cfg.sweep.du_values(), cfg.vehicle,
        steering_limit=cfg.simulation.steering_limit,
        torque_limit=cfg.simulation.torque_limit,
        threads=max(1, int(args.threads)))
    sweep_to_csv(sweep, f"{out}/sweep.csv")
    box = sweep.converged_box()
    _writeline(f"{out}/sweep_summary.txt", [
        "# region-of-attraction sweep summary",
        f"grid {len(sweep.dv_values)}x{len(sweep.du_values)}",
        f"converged_points {int(np.sum(sweep.converged))}",
        f"origin_converged {int(bool(sweep.converged[_origin(sweep.dv_values), _origin(sweep.du_values)]))}",
        f"dv_half_width_m_per_s {box[0]:.17g}",
        f"du_half_width_m_per_s {box[1]:.17g}",
    ])
    print(f"sweep: {int(np.sum(sweep.converged))} of {sweep.converged.size} "
          f"points converged")
    return EXIT_OK


def _origin(values):
    return int(np.argmin(np.abs(values)))


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="lpvtrack",
        description="Robust gain-scheduled trajectory tracking pipeline")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p, gain=False):
        p.add_argument("--config", required=True, help="path to the INI config")
        p.add_argument("--out", default=".", help="output directory")
        p.add_argument("--seed", type=int, default=0,
                       help="seed for any randomized stage (pipeline is "
                            "deterministic; recorded for provenance)")
        p.add_argument("--threads", type=int, default=1,
                       help="worker cap for parallel stages")
        if gain:
            p.add_argument("--gain", required=True,
                           help="gain file written by `synthesize`")

    p_ref = sub.add_parser("reference", help="generate the open-loop reference")
    common(p_ref)
    p_ref.set_defaults(func=cmd_reference)

    p_syn = sub.add_parser("synthesize", help="LMI gain synthesis + certification")
    common(p_syn)
    p_syn.add_argument("--mode", choices=("contractivity", "dstab"),
                       help="override the synthesis mode from the config")
    p_syn.set_defaults(func=cmd_synthesize)

    p_sim = sub.add_parser("simulate", help="closed-loop simulation from offsets")
    common(p_sim, gain=True)
    p_sim.add_argument("--offset", action="append", default=[],
                       metavar="DV,DU",
                       help="initial (dv, du) offset in m/s; repeatable "
                            "(default 0.3,0.3)")
    p_sim.set_defaults(func=cmd_simulate)

    p_swp = sub.add_parser("sweep", help="region-of-attraction grid sweep")
    common(p_swp, gain=True)
    p_swp.set_defaults(func=cmd_sweep)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors already; normalize others
        return int(exc.code) if exc.code else EXIT_OK
    try:
        return args.func(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ManeuverInfeasible as exc:
        print(f"maneuver infeasible: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except LpvTrackError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except OSError as exc:
        print(f"i/o error: {exc}", file=sys.stderr)
        return EXIT_USAGE


if __name__ == "__main__":
    sys.exit(main())
