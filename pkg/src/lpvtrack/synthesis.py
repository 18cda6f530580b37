"""Robust static state-feedback synthesis over the polytope vertices.

Two LMI families are offered: quadratic contractivity at level beta, and
D-stabilization for an LMI region (here a vertical strip of the left
half plane). Both search a common Lyapunov matrix Q and a variable R;
the gain is K = R Q^{-1}.

The semidefinite feasibility step runs behind a small solver-interface
shim (:class:`SdpBackend`); the default backend hands the problem to
cvxpy. Every reported solution is re-verified with plain eigenvalue
checks, and an infeasible verdict carries the best-achieved residual
rather than claiming a proof.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, InvalidStrip, SolverStalled

_SYMMETRY_TOL = 1e-12


@dataclass(frozen=True)
class LmiRegion:
    """Complex-plane region { z : L + z M + conj(z) M^T < 0 }."""

    ell: np.ndarray
    em: np.ndarray

    @property
    def order(self) -> int:
        return self.ell.shape[0]

    def characteristic(self, z: complex) -> np.ndarray:
        return self.ell + z * self.em + np.conj(z) * self.em.T

    def contains(self, z: complex, margin: float = 0.0) -> bool:
        """Strict membership: the characteristic matrix is negative definite."""
        f = self.characteristic(z)
        f = 0.5 * (f + f.conj().T)
        return bool(np.max(np.linalg.eigvalsh(f)) < -margin)


def vertical_strip_region(lambda_max: float = -2.0,
                          lambda_min: float = -40.0) -> LmiRegion:
    """Strip lambda_min < Re(z) < lambda_max of the open left half plane.

    Block 1 encodes Re(z) < lambda_max, block 2 encodes Re(z) > lambda_min;
    both bounds sit exactly on the region boundary.
    """
    if not lambda_min < lambda_max < 0.0:
        raise InvalidStrip(
            f"need lambda_min < lambda_max < 0, got {lambda_min}, {lambda_max}")
    ell = np.diag([-2.0 * lambda_max, 2.0 * lambda_min])
    em = np.diag([1.0, -1.0])
    return LmiRegion(ell, em)


def _kron(const, expr):
    """Kronecker product dispatching between numpy and cvxpy operands."""
    if isinstance(expr, np.ndarray):
        return np.kron(const, expr)
    import cvxpy as cp
    return cp.kron(const, expr)


@dataclass
class MatrixConstraint:
    """One affine matrix-inequality: expr(Q, R) must be < -margin * I.

    ``block_exprs``, when set, lists callables whose values are the
    diagonal blocks of ``expr`` (the expression is block-diagonal, as
    for Kronecker products with diagonal region matrices). Backends may
    impose the blocks as separate smaller cone constraints; residuals
    and evaluation always use the full expression.
    """

    expr: callable
    margin: float
    label: str
    block_exprs: list | None = None

    def evaluate(self, q: np.ndarray, r: np.ndarray) -> np.ndarray:
        value = np.asarray(self.expr(q, r), dtype=float)
        asym = np.max(np.abs(value - value.T))
        if asym > _SYMMETRY_TOL * max(1.0, np.max(np.abs(value))):
            raise ValueError(f"constraint {self.label} is not symmetric")
        return 0.5 * (value + value.T)

    def residual(self, q: np.ndarray, r: np.ndarray) -> float:
        """Largest eigenvalue; feasible iff below -margin."""
        return float(np.max(np.linalg.eigvalsh(self.evaluate(q, r))))


@dataclass
class SdpProblem:
    """Common-Lyapunov feasibility problem in the pair (Q, R)."""

    state_dim: int
    input_dim: int
    constraints: list[MatrixConstraint] = field(default_factory=list)

    def worst_residual(self, q, r) -> tuple[float, str]:
        worst, label = -np.inf, ""
        for con in self.constraints:
            res = con.residual(q, r) + con.margin
            if res > worst:
                worst, label = res, con.label
        return worst, label


def contractivity_lmi(vertices, beta: float, state_dim: int | None = None,
                      input_dim: int | None = None,
                      margin_scale: float = 1e-7) -> SdpProblem:
    """Decay-rate LMIs: Q A^T + A Q + R^T B^T + B R + 2 beta Q < 0 per vertex."""
    if beta <= 0.0:
        raise ValueError(f"contractivity level must be > 0, got {beta}")
    vertices = [(np.atleast_2d(np.asarray(a, float)), _as_input_matrix(b))
                for a, b in vertices]
    if not vertices:
        raise ValueError("need at least one vertex")
    n = state_dim or vertices[0][0].shape[0]
    m = input_dim or vertices[0][1].shape[1]
    problem = SdpProblem(n, m)
    for i, (a, b) in enumerate(vertices):
        margin = margin_scale * (1.0 + np.linalg.norm(a))

        def expr(q, r, a=a, b=b):
            return q @ a.T + a @ q + r.T @ b.T + b @ r + 2.0 * beta * q

        problem.constraints.append(MatrixConstraint(expr, margin, f"vertex {i}"))
    return problem


def dstab_lmi(vertices, region: LmiRegion,
              margin_scale: float = 1e-7) -> SdpProblem:
    """Region-placement LMIs with the Kronecker structure of the region.

    One constraint of size (order * n) per vertex:
    L (x) Q + M (x) (A Q + B R) + M^T (x) (A Q + B R)^T < 0.
    """
    vertices = [(np.atleast_2d(np.asarray(a, float)), _as_input_matrix(b))
                for a, b in vertices]
    if not vertices:
        raise ValueError("need at least one vertex")
    n = vertices[0][0].shape[0]
    m = vertices[0][1].shape[1]
    ell, em = region.ell, region.em
    problem = SdpProblem(n, m)
    diagonal_region = (np.count_nonzero(ell - np.diag(np.diag(ell))) == 0
                       and np.count_nonzero(em - np.diag(np.diag(em))) == 0)
    for i, (a, b) in enumerate(vertices):
        margin = margin_scale * (1.0 + np.linalg.norm(a))

        def expr(q, r, a=a, b=b):
            closed = a @ q + b @ r
            return (_kron(ell, q) + _kron(em, closed)
                    + _kron(em.T, closed.T))

        blocks = None
        if diagonal_region:
            def block(q, r, a, b, lk, mk):
                closed = a @ q + b @ r
                return lk * q + mk * closed + mk * closed.T

            blocks = [
                (lambda q, r, a=a, b=b, lk=ell[k, k], mk=em[k, k]:
                 block(q, r, a, b, lk, mk))
                for k in range(region.order)
            ]
        problem.constraints.append(
            MatrixConstraint(expr, margin, f"vertex {i}", block_exprs=blocks))
    return problem


def _as_input_matrix(b) -> np.ndarray:
    b = np.asarray(b, dtype=float)
    if b.ndim < 2:
        b = b.reshape(-1, 1)
    return b


@dataclass
class SynthesisResult:
    """Certified feedback gain with its Lyapunov certificate."""

    q: np.ndarray
    r: np.ndarray
    gain: np.ndarray             # K = R Q^{-1}
    worst_residual: float        # max constraint eigenvalue (margin included)
    worst_label: str
    feasible: bool
    mode: str = ""
    detail: str = ""


class SdpBackend:
    """Interface for pluggable semidefinite feasibility solvers."""

    def solve(self, problem: SdpProblem) -> SynthesisResult:
        raise NotImplementedError


class CvxpyBackend(SdpBackend):
    """Default backend: hand the feasibility problem to cvxpy.

    Phase 1 solves the strict problem with the per-constraint margins.
    When ``row_weights`` is given, a refinement pass then freezes the
    feasible Q and minimizes the row-weighted norm of R alone (the
    constraints are affine in R, so this is a small conic problem); with
    Q >= I, ||R|| bounds the gain ||R Q^-1||. An unregularized feasible
    point tends to huge gains that leave the certified operating regime
    the moment an actuator saturates, so the smallest usable gain is
    much more robust in closed loop.
    If phase 1 fails, phase 2 minimizes the common constraint shift t
    (with Q boxed between I and a large multiple of I) to report the
    best-achieved residual.
    """

    def __init__(self, solver: str | None = None, scale_cap: float = 1e6,
                 row_weights=None):
        self.solver = solver
        self.scale_cap = scale_cap
        self.row_weights = row_weights

    def _pick_solver(self, cp):
        """Prefer an interior-point SDP solver; first-order defaults are
        orders of magnitude slower on these small dense LMIs."""
        if self.solver:
            return self.solver
        if "CLARABEL" in cp.installed_solvers():
            return "CLARABEL"
        return None

    @staticmethod
    def _cone_constraints(problem, cp, q, r, extra_margin=0.0):
        """Conic form of every matrix constraint.

        Block-diagonal constraints are imposed per block: the solver
        then handles several small PSD cones instead of one large one,
        which is much cheaper to canonicalize and to factorize.
        """
        zero = np.zeros((problem.input_dim, problem.state_dim))
        eye = np.eye(problem.state_dim)
        cons = []
        for con in problem.constraints:
            bound = con.margin + extra_margin
            exprs = con.block_exprs or [con.expr]
            for ex in exprs:
                size = np.asarray(ex(eye, zero)).shape[0]
                cons.append(ex(q, r) << -bound * np.eye(size))
        return cons

    def _solve_problem(self, problem, cp, shift=None):
        n, m = problem.state_dim, problem.input_dim
        q = cp.Variable((n, n), symmetric=True)
        r = cp.Variable((m, n))
        cons = [q >> np.eye(n)]
        if shift is None:
            cons += self._cone_constraints(problem, cp, q, r)
            objective = cp.Minimize(0)
        else:
            cons.append(q << self.scale_cap * np.eye(n))
            zero = np.zeros((m, n))
            for con in problem.constraints:
                size = np.asarray(con.expr(np.eye(n), zero)).shape[0]
                cons.append(con.expr(q, r) << shift * np.eye(size))
            objective = cp.Minimize(shift)
        prob = cp.Problem(objective, cons)
        solver = self._pick_solver(cp)
        prob.solve(**({"solver": solver} if solver else {}))
        return prob, q.value, r.value

    def _refine_gain(self, problem, cp, q_fixed, slack):
        """Minimize ||diag(w) K|| with Q frozen at a feasible value.

        Substituting R = K Q keeps every constraint affine (now in K),
        so the actual gain entries are minimized, weighted by the
        inverse actuator limits. The constraints are tightened by a
        fraction of the phase-1 slack so the norm-minimal point stays
        strictly feasible for the original margins despite solver
        tolerance; otherwise the eigenvalue recheck would reject it for
        sitting exactly on the boundary.
        """
        m = problem.input_dim
        k = cp.Variable((m, problem.state_dim))
        r = k @ q_fixed
        weights = np.asarray(self.row_weights, dtype=float).reshape(m)
        buffer = 0.25 * max(slack, 0.0)
        cons = self._cone_constraints(problem, cp, q_fixed, r,
                                      extra_margin=buffer)
        prob = cp.Problem(cp.Minimize(cp.norm(cp.diag(weights) @ k, "fro")),
                          cons)
        solver = self._pick_solver(cp)
        try:
            prob.solve(**({"solver": solver} if solver else {}))
        except cp.error.SolverError:
            return None
        if prob.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) \
                or k.value is None:
            return None
        return np.asarray(k.value) @ q_fixed

    def solve(self, problem: SdpProblem) -> SynthesisResult:
        import cvxpy as cp

        try:
            prob, q, r = self._solve_problem(problem, cp)
        except cp.error.SolverError as exc:
            raise SolverStalled(f"SDP backend failed: {exc}") from exc

        if prob.status in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) and q is not None:
            q = 0.5 * (q + q.T)
            worst, label = problem.worst_residual(q, r)
            if worst < 0.0:
                detail = f"phase-1 status {prob.status}"
                if self.row_weights is not None:
                    refined = self._refine_gain(problem, cp, q, slack=-worst)
                    if refined is not None:
                        worst_r, label_r = problem.worst_residual(q, refined)
                        if worst_r < 0.0:
                            r, worst, label = refined, worst_r, label_r
                            detail += ", gain-norm refined"
                return SynthesisResult(
                    q=q, r=r, gain=r @ np.linalg.inv(q),
                    worst_residual=worst, worst_label=label, feasible=True,
                    detail=detail)

        # Phase 2: least-violation diagnostic; never a feasibility proof.
        shift = cp.Variable()
        try:
            prob2, q2, r2 = self._solve_problem(problem, cp, shift=shift)
        except cp.error.SolverError as exc:
            raise SolverStalled(f"SDP backend failed: {exc}") from exc
        if prob2.status not in (cp.OPTIMAL, cp.OPTIMAL_INACCURATE) or q2 is None:
            raise SolverStalled(f"SDP backend returned status {prob2.status}")
        q2 = 0.5 * (q2 + q2.T)
        worst, label = problem.worst_residual(q2, r2)
        return SynthesisResult(
            q=q2, r=r2, gain=r2 @ np.linalg.inv(q2),
            worst_residual=worst, worst_label=label, feasible=False,
            detail="no feasible point found (best residual reported)")


def solve_feasibility(problem: SdpProblem,
                      backend: SdpBackend | None = None) -> SynthesisResult:
    """Search a (Q, R) pair satisfying every constraint with its margin.

    Success is always re-verified by eigenvalue checks on the returned
    pair; an infeasible verdict only means the backend found no point.
    """
    backend = backend or CvxpyBackend()
    return backend.solve(problem)


@dataclass
class VertexCertificate:
    index: int
    eigenvalues: np.ndarray
    spectral_abscissa: float
    in_region: bool


@dataclass
class CertificationReport:
    vertices: list[VertexCertificate]
    passed: bool

    @property
    def offending(self):
        return [v.index for v in self.vertices if not v.in_region]

    def worst_abscissa(self) -> float:
        return max(v.spectral_abscissa for v in self.vertices)


def certify_gain(gain, vertices, region: LmiRegion,
                 margin: float = 0.0) -> CertificationReport:
    """Eigenvalue audit of A_i + B_i K over all vertices against the region."""
    gain = np.asarray(gain, dtype=float)
    certs = []
    for i, (a, b) in enumerate(vertices):
        a = np.atleast_2d(np.asarray(a, float))
        b = _as_input_matrix(b)
        eigs = np.linalg.eigvals(a + b @ gain)
        ok = all(region.contains(z, margin) for z in eigs)
        certs.append(VertexCertificate(i, eigs, float(np.max(eigs.real)), ok))
    return CertificationReport(certs, all(c.in_region for c in certs))


def save_synthesis(result: SynthesisResult, report: CertificationReport | None,
                   path):
    """Write Q, R, K (17 significant digits) plus a certification summary."""
    lines = ["# lpvtrack synthesis result"]
    lines.append(f"mode {result.mode}")
    lines.append(f"feasible {int(result.feasible)}")
    lines.append(f"worst_residual {result.worst_residual:.17g}")
    n, m = result.q.shape[0], result.gain.shape[0]
    lines.append(f"state_dim {n}")
    lines.append(f"input_dim {m}")
    for name, mat in (("Q", result.q), ("R", result.r), ("K", result.gain)):
        lines.append(name)
        for row in np.atleast_2d(mat):
            lines.append(" ".join(f"{v:.17g}" for v in row))
    if report is not None:
        lines.append("certification")
        lines.append(f"vertices {len(report.vertices)}")
        lines.append(f"worst_abscissa {report.worst_abscissa():.17g}")
        lines.append(f"pass {int(report.passed)}")
        if report.offending:
            lines.append("offending " + " ".join(map(str, report.offending)))
    with open(path, "w") as fh:
        fh.write("\n".join(lines) + "\n")


def load_gain(path) -> np.ndarray:
    """Read back the K block of a synthesis result file."""
    with open(path) as fh:
        lines = [ln.strip() for ln in fh if ln.strip() and not ln.startswith("#")]
    try:
        dims = {}
        for ln in lines:
            parts = ln.split()
            if parts[0] in ("state_dim", "input_dim"):
                dims[parts[0]] = int(parts[1])
        idx = lines.index("K")
        m, n = dims["input_dim"], dims["state_dim"]
        rows = [list(map(float, lines[idx + 1 + i].split())) for i in range(m)]
    except (ValueError, KeyError, IndexError) as exc:
        raise ConfigError(f"malformed gain file {path}: {exc}") from exc
    gain = np.array(rows)
    if gain.shape != (m, n):
        raise ConfigError(
            f"gain block in {path} has shape {gain.shape}, expected {(m, n)}")
    return gain
