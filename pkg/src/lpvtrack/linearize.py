"""Time-varying linearization along the reference and its polytopic
reduction.

At each trajectory sample the model splits into an explicit part and the
saturation channels; the six Jacobian blocks are built by central finite
differences with the chain-rule composition through the loop variables.
Closing the saturation channels with per-channel sector slopes gives the
sector-approximated pair (A_tilde, B_tilde), which is augmented with the
position-error kinematics and reduced to an affine parameter box whose
vertex systems feed the LMI synthesis.
"""
from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .dynamics import bsigma_matrix, explicit_part, h_and_sigma
from .errors import DegenerateFamily, SingularLoop, TooManyParameters
from .params import SIGMA_CHANNELS, VehicleParams
from .simulate import ReferenceTrajectory

MAX_PARAMETERS = 12
_COND_LIMIT = 1e8


@dataclass
class LinearizedSystem:
    """The six per-sample matrices of the loop-separated linear model."""

    a: np.ndarray        # (5, 5) state block of the explicit part
    b: np.ndarray        # (5, 3) input block (incl. steering-rotation terms)
    b_sigma: np.ndarray  # (5, 6) saturation-channel input block
    c: np.ndarray        # (6, 5) loop-output state block
    d: np.ndarray        # (6, 3) loop-output input block
    d_sigma: np.ndarray  # (6, 6) loop feedthrough
    timestamp: float = 0.0

    def validate(self):
        for name in ("a", "b", "b_sigma", "c", "d", "d_sigma"):
            mat = getattr(self, name)
            if not np.all(np.isfinite(mat)):
                raise ValueError(f"non-finite entries in {name}")


def _central_diff(fun, x0, fd_step):
    """Column-wise central differences of fun at x0 (1-D argument)."""
    x0 = np.asarray(x0, dtype=float)
    cols = []
    for i in range(x0.size):
        step = fd_step * max(1.0, abs(x0[i]))
        hi = x0.copy(); hi[i] += step
        lo = x0.copy(); lo[i] -= step
        cols.append((np.asarray(fun(hi)) - np.asarray(fun(lo))) / (2.0 * step))
    return np.stack(cols, axis=-1)


def jacobians_at(state, inp, xdot, sigma, params: VehicleParams,
                 fd_step: float = 1e-6, smooth: bool = False,
                 check_tol: float = 1e-8, timestamp: float = 0.0) -> LinearizedSystem:
    """Finite-difference Jacobian blocks at a converged trajectory point.

    The point (state, input, xdot, sigma) must satisfy the saturation
    loop: one re-substitution may move sigma by at most ``check_tol``.
    """
    x5 = np.asarray(state, dtype=float)[:5]
    u3 = np.asarray(inp, dtype=float)[:3]
    xd5 = np.asarray(xdot, dtype=float)[:5]
    sigma = np.asarray(sigma, dtype=float)

    _, sigma_check = h_and_sigma(xd5[0], x5, u3, params, smooth)
    residual = float(np.max(np.abs(sigma_check - sigma)))
    if residual > check_tol:
        raise ValueError(
            f"point violates the algebraic loop: residual {residual:.3e}")

    b_sig = bsigma_matrix(u3, params)
    a = _central_diff(lambda x: explicit_part(x, u3, params), x5, fd_step)
    b = _central_diff(
        lambda u: explicit_part(x5, u, params) + bsigma_matrix(u, params) @ sigma,
        u3, fd_step)

    def h_of(xd, x, u):
        return h_and_sigma(xd[0], x, u, params, smooth)[0]

    h_xd = _central_diff(lambda xd: h_of(xd, x5, u3), xd5, fd_step)
    h_x = _central_diff(lambda x: h_of(xd5, x, u3), x5, fd_step)
    h_u = _central_diff(lambda u: h_of(xd5, x5, u), u3, fd_step)

    c = h_xd @ a + h_x
    d = h_xd @ b + h_u
    # h carries no direct sigma argument; the feedthrough is purely the
    # acceleration path through B_sigma.
    d_sigma = h_xd @ b_sig

    lin = LinearizedSystem(a, b, b_sig, c, d, d_sigma, timestamp)
    lin.validate()
    return lin


@dataclass
class SectorBounds:
    """Per-channel slope ranges of the saturation nonlinearities."""

    k_min: np.ndarray    # (6,)
    k_max: np.ndarray    # (6,)
    slopes: np.ndarray   # (T, 6) per-sample secant slopes
    t: np.ndarray        # (T,)

    @property
    def k_mid(self) -> np.ndarray:
        return 0.5 * (self.k_min + self.k_max)

    def k_sigma(self) -> np.ndarray:
        """Diagonal slope matrix at the sector midpoints."""
        return np.diag(self.k_mid)

    def to_csv(self, path):
        import csv
        with open(path, "w", newline="") as fh:
            writer = csv.writer(fh)
            writer.writerow(["channel", "t", "slope"])
            for i, name in enumerate(SIGMA_CHANNELS):
                for k in range(len(self.t)):
                    writer.writerow([name, f"{self.t[k]:.17g}",
                                     f"{self.slopes[k, i]:.17g}"])


def saturation_centers(params: VehicleParams) -> np.ndarray:
    """Bound midpoints of each saturation channel.

    The load channels saturate on [0, m g]; the force channels are
    symmetric about zero.
    """
    centers = np.zeros(6)
    centers[0] = centers[1] = 0.5 * params.weight
    return centers


def sector_slopes(ref: ReferenceTrajectory, params: VehicleParams,
                  rel_tol: float = 1e-6) -> SectorBounds:
    """Secant slopes of every saturation channel along the reference.

    The secant is taken through the center of each channel's bounds;
    samples closer to the center than ``rel_tol`` of the channel's
    excursion fall back to the linear-regime slope 1.
    """
    centers = saturation_centers(params)
    dh = ref.hs - centers
    dsig = ref.sigmas - centers
    scale = np.maximum(np.max(np.abs(dh), axis=0), 1.0)
    near_center = np.abs(dh) < rel_tol * scale
    slopes = np.where(near_center, 1.0, dsig / np.where(near_center, 1.0, dh))
    return SectorBounds(
        k_min=np.min(slopes, axis=0),
        k_max=np.max(slopes, axis=0),
        slopes=slopes,
        t=ref.t,
    )


def sector_closed_matrices(lin: LinearizedSystem, k_sigma):
    """Close the saturation channels with fixed slopes (A_tilde, B_tilde)."""
    k_sigma = np.asarray(k_sigma, dtype=float)
    loop = np.eye(6) - lin.d_sigma @ k_sigma
    if np.linalg.cond(loop) > _COND_LIMIT:
        raise SingularLoop(
            "I - D_sigma K_sigma is ill conditioned; sector slopes invalid")
    gain = lin.b_sigma @ k_sigma @ np.linalg.solve(loop, np.eye(6))
    return lin.a + gain @ lin.c, lin.b + gain @ lin.d


def augment_error_dynamics(a_tilde, b_tilde, psi0: float, v0: float):
    """Append position/heading error rows to the 5-state deviation model.

    State order: (dv, du, dr, d_omega_wf, d_omega_wr, x_L, y_L, d_psi).
    Valid in the small-heading regime of the reference.
    """
    if abs(psi0) >= np.pi / 4.0:
        raise ValueError(f"heading {psi0} rad outside the small-angle regime")
    a_aug = np.zeros((8, 8))
    b_aug = np.zeros((8, 3))
    a_aug[:5, :5] = a_tilde
    b_aug[:5, :] = b_tilde
    a_aug[5, 0] = 1.0                    # x_L' = dv
    a_aug[6, 0] = psi0                   # y_L' = dv psi0 + dpsi v0 cos psi0
    a_aug[6, 7] = v0 * np.cos(psi0)
    a_aug[7, 2] = 1.0                    # dpsi' = dr
    return a_aug, b_aug


#: Augmented-matrix locations that are always scheduled on (heading terms).
HEADING_ENTRIES = (("A", 6, 0), ("A", 6, 7))


def linearize_family(ref: ReferenceTrajectory, params: VehicleParams,
                     k_sigma, sample_every: int = 10, fd_step: float = 1e-6,
                     smooth: bool = False):
    """Augmented (A(t), B(t)) family sampled along the reference.

    Returns (times, a_stack, b_stack) with shapes (T,), (T, 8, 8) and
    (T, 8, 3).
    """
    idx = np.arange(0, len(ref), max(1, int(sample_every)))
    a_stack = np.zeros((len(idx), 8, 8))
    b_stack = np.zeros((len(idx), 8, 3))
    for j, k in enumerate(idx):
        lin = jacobians_at(ref.states[k], ref.inputs[k], ref.xdots[k],
                           ref.sigmas[k], params, fd_step=fd_step,
                           smooth=smooth, timestamp=float(ref.t[k]))
        a_t, b_t = sector_closed_matrices(lin, k_sigma)
        a_stack[j], b_stack[j] = augment_error_dynamics(
            a_t, b_t, float(ref.states[k, 7]), float(ref.states[k, 0]))
    return ref.t[idx], a_stack, b_stack


@dataclass(frozen=True)
class ParameterDescriptor:
    """One varying matrix entry and its observed range."""

    matrix: str  # "A" or "B"
    row: int
    col: int
    low: float
    high: float


@dataclass
class PolytopicModel:
    """Axis-aligned parameter box around the trajectory-frozen base model."""

    base_a: np.ndarray   # (8, 8) trajectory means
    base_b: np.ndarray   # (8, 3)
    descriptors: tuple[ParameterDescriptor, ...]
    n_time_varying: int = 0   # diagnostic: entries with any variation

    @property
    def n_parameters(self) -> int:
        return len(self.descriptors)

    @property
    def n_vertices(self) -> int:
        return 2 ** self.n_parameters

    def vertex(self, index: int):
        """Vertex (A_i, B_i): bit i of ``index`` picks each endpoint."""
        a = self.base_a.copy()
        b = self.base_b.copy()
        for i, desc in enumerate(self.descriptors):
            value = desc.high if (index >> i) & 1 else desc.low
            (a if desc.matrix == "A" else b)[desc.row, desc.col] = value
        return a, b

    def vertex_systems(self):
        return [self.vertex(i) for i in range(self.n_vertices)]

    def to_json(self, path):
        payload = {
            "state_dim": self.base_a.shape[0],
            "input_dim": self.base_b.shape[1],
            "n_time_varying": self.n_time_varying,
            "descriptors": [
                {"matrix": d.matrix, "row": d.row, "col": d.col,
                 "low": d.low, "high": d.high}
                for d in self.descriptors
            ],
            "base_a": self.base_a.tolist(),
            "base_b": self.base_b.tolist(),
        }
        with open(path, "w") as fh:
            json.dump(payload, fh, indent=1)

    @classmethod
    def from_json(cls, path):
        with open(path) as fh:
            payload = json.load(fh)
        return cls(
            base_a=np.array(payload["base_a"]),
            base_b=np.array(payload["base_b"]),
            descriptors=tuple(
                ParameterDescriptor(d["matrix"], d["row"], d["col"],
                                    d["low"], d["high"])
                for d in payload["descriptors"]
            ),
            n_time_varying=payload.get("n_time_varying", 0),
        )


def select_varying_parameters(a_stack, b_stack, count: int = 6):
    """Pick the entries that vary the most along the trajectory.

    Entries are ranked by their range normalized by their peak absolute
    value (scale free); the heading-kinematics entries are excluded from
    the ranking and appended afterwards as dedicated parameters. Returns
    (descriptors, n_time_varying).
    """
    a_stack = np.asarray(a_stack, dtype=float)
    b_stack = np.asarray(b_stack, dtype=float)
    if a_stack.shape[0] < 2:
        raise DegenerateFamily("need at least two samples to observe variation")

    candidates = []
    n_varying = 0
    for name, stack in (("A", a_stack), ("B", b_stack)):
        lo = stack.min(axis=0)
        hi = stack.max(axis=0)
        rng = hi - lo
        peak = np.maximum(np.abs(lo), np.abs(hi))
        varying = rng > 1e-9 * (1.0 + peak)
        n_varying += int(np.count_nonzero(varying))
        score = np.where(varying, rng / np.maximum(peak, 1e-30), 0.0)
        for row in range(stack.shape[1]):
            for col in range(stack.shape[2]):
                if (name, row, col) in HEADING_ENTRIES:
                    continue
                if varying[row, col]:
                    candidates.append((float(score[row, col]), name, row, col,
                                       float(lo[row, col]), float(hi[row, col])))
    if n_varying == 0:
        raise DegenerateFamily("every matrix entry is constant along the trajectory")

    candidates.sort(key=lambda c: (-c[0], c[1], c[2], c[3]))
    chosen = [ParameterDescriptor(name, row, col, lo, hi)
              for _, name, row, col, lo, hi in candidates[:count]]

    for name, row, col in HEADING_ENTRIES:
        stack = a_stack if name == "A" else b_stack
        chosen.append(ParameterDescriptor(
            name, row, col,
            float(stack[:, row, col].min()), float(stack[:, row, col].max())))
    return tuple(chosen), n_varying


def build_polytope(a_stack, b_stack, descriptors,
                   n_time_varying: int = 0) -> PolytopicModel:
    """Freeze non-scheduled entries at their means and box the rest."""
    if len(descriptors) > MAX_PARAMETERS:
        raise TooManyParameters(
            f"{len(descriptors)} parameters would need "
            f"{2 ** len(descriptors)} vertices")
    return PolytopicModel(
        base_a=np.asarray(a_stack, float).mean(axis=0),
        base_b=np.asarray(b_stack, float).mean(axis=0),
        descriptors=tuple(descriptors),
        n_time_varying=n_time_varying,
    )


def polytope_from_reference(ref: ReferenceTrajectory, params: VehicleParams,
                            sample_every: int = 10, fd_step: float = 1e-6,
                            count: int = 6):
    """Full reduction pipeline: sectors, Jacobian family, parameter box.

    Returns (polytope, sectors, times, a_stack, b_stack).
    """
    sectors = sector_slopes(ref, params)
    times, a_stack, b_stack = linearize_family(
        ref, params, sectors.k_sigma(), sample_every=sample_every,
        fd_step=fd_step)
    descriptors, n_varying = select_varying_parameters(a_stack, b_stack, count)
    poly = build_polytope(a_stack, b_stack, descriptors, n_varying)
    return poly, sectors, times, a_stack, b_stack
