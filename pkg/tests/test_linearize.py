import numpy as np
import pytest

from lpvtrack.dynamics import resolve_algebraic_loop
from lpvtrack.errors import SingularLoop, TooManyParameters
from lpvtrack.linearize import (
    HEADING_ENTRIES, LinearizedSystem, ParameterDescriptor, PolytopicModel,
    augment_error_dynamics, build_polytope, jacobians_at, linearize_family,
    polytope_from_reference, saturation_centers, sector_closed_matrices,
    sector_slopes, select_varying_parameters,
)
from lpvtrack.params import IPSI, IV, VehicleParams, VehicleState
from smooth_oracle import smooth_jacobians, smooth_residual


def operating_point(params, v=19.44, u=0.2, r=0.05,
                    inp=(0.02, 50.0, 50.0), smooth=False):
    s = VehicleState.rolling(v, params)
    s.u, s.r = u, r
    x = s.as_array()
    uarr = np.asarray(inp, dtype=float)
    xd, sigma, h = resolve_algebraic_loop(x, uarr, params, smooth=smooth)
    return x, uarr, xd, sigma, h


class TestJacobians:
    def test_shapes(self, params):
        x, u, xd, sigma, _ = operating_point(params)
        lin = jacobians_at(x, u, xd, sigma, params)
        assert lin.a.shape == (5, 5)
        assert lin.b.shape == (5, 3)
        assert lin.b_sigma.shape == (5, 6)
        assert lin.c.shape == (6, 5)
        assert lin.d.shape == (6, 3)
        assert lin.d_sigma.shape == (6, 6)

    def test_rejects_inconsistent_point(self, params):
        x, u, xd, sigma, _ = operating_point(params)
        with pytest.raises(ValueError):
            jacobians_at(x, u, xd, sigma + 1.0, params)

    def test_smooth_model_matches_symbolic_oracle(self, params):
        # independent sympy derivation via the implicit function theorem
        x, u, xd, sigma, _ = operating_point(params, smooth=True)
        assert abs(smooth_residual(x, u, xd[0], params)) < 1e-12
        a_ref, b_ref = smooth_jacobians(x, u, xd[0], params)
        lin = jacobians_at(x, u, xd, sigma, params, smooth=True)
        a_fd, b_fd = sector_closed_matrices(lin, np.eye(6))
        for fd, ref in ((a_fd, a_ref), (b_fd, b_ref)):
            big = np.abs(ref) > 1e-3
            rel = np.abs(fd - ref)[big] / np.abs(ref)[big]
            assert rel.max() < 1e-6

    def test_richardson_consistency_full_model(self, params):
        # the step-halved Jacobian agrees with the nominal one at the
        # rate expected of second-order central differences
        x, u, xd, sigma, _ = operating_point(params)
        lin1 = jacobians_at(x, u, xd, sigma, params, fd_step=1e-5)
        lin2 = jacobians_at(x, u, xd, sigma, params, fd_step=5e-6)
        scale = np.maximum(np.abs(lin2.a), 1.0)
        assert np.max(np.abs(lin1.a - lin2.a) / scale) < 1e-4

    def test_wheel_mode_magnitude(self, params):
        # the wheel-spin modes are the fastest: tire stiffness against
        # the lumped axle-plus-driveline inertia puts them in the tens
        # of 1/s, well left of the lateral modes
        x, u, xd, sigma, _ = operating_point(params)
        lin = jacobians_at(x, u, xd, sigma, params)
        at, _ = sector_closed_matrices(lin, np.diag(np.ones(6)))
        eig = np.linalg.eigvals(at)
        assert -60.0 < np.min(eig.real) < -15.0


class TestSectorClosure:
    def test_zero_slope_recovers_open_blocks(self, params):
        x, u, xd, sigma, _ = operating_point(params)
        lin = jacobians_at(x, u, xd, sigma, params)
        at, bt = sector_closed_matrices(lin, np.zeros((6, 6)))
        np.testing.assert_array_equal(at, lin.a)
        np.testing.assert_array_equal(bt, lin.b)

    def test_zero_feedthrough_formula(self, params):
        x, u, xd, sigma, _ = operating_point(params)
        lin = jacobians_at(x, u, xd, sigma, params)
        lin.d_sigma = np.zeros((6, 6))
        k = np.diag(np.full(6, 0.7))
        at, bt = sector_closed_matrices(lin, k)
        np.testing.assert_allclose(at, lin.a + lin.b_sigma @ k @ lin.c,
                                   rtol=1e-12)
        np.testing.assert_allclose(bt, lin.b + lin.b_sigma @ k @ lin.d,
                                   rtol=1e-12)

    def test_singular_loop_raises(self, params):
        x, u, xd, sigma, _ = operating_point(params)
        lin = jacobians_at(x, u, xd, sigma, params)
        lin.d_sigma = np.eye(6)
        with pytest.raises(SingularLoop):
            sector_closed_matrices(lin, np.eye(6))


class TestSectors:
    def test_slopes_valid(self, short_ref, params):
        sb = sector_slopes(short_ref, params)
        assert np.all(sb.k_min <= sb.k_max + 1e-12)
        assert np.all(sb.k_max <= 1.0 + 1e-6)
        assert np.all(sb.k_min > 0.0)

    def test_centers(self, params):
        c = saturation_centers(params)
        assert c[0] == c[1] == pytest.approx(0.5 * params.weight)
        assert np.all(c[2:] == 0.0)

    def test_midpoint_gains(self, short_ref, params):
        sb = sector_slopes(short_ref, params)
        np.testing.assert_allclose(np.diag(sb.k_sigma()),
                                   0.5 * (sb.k_min + sb.k_max))


class TestAugment:
    def test_structure(self, params):
        at = np.arange(25, dtype=float).reshape(5, 5)
        bt = np.arange(15, dtype=float).reshape(5, 3)
        psi0, v0 = 0.1, 19.0
        a8, b8 = augment_error_dynamics(at, bt, psi0, v0)
        np.testing.assert_array_equal(a8[:5, :5], at)
        np.testing.assert_array_equal(b8[:5], bt)
        assert a8[5, 0] == 1.0
        assert a8[6, 0] == pytest.approx(psi0)
        assert a8[6, 7] == pytest.approx(v0 * np.cos(psi0))
        assert a8[7, 2] == 1.0
        assert np.all(b8[5:] == 0.0)
        # no other coupling rows
        assert np.count_nonzero(a8[5:]) == 4

    def test_large_heading_rejected(self, params):
        with pytest.raises(ValueError):
            augment_error_dynamics(np.zeros((5, 5)), np.zeros((5, 3)),
                                   1.0, 19.0)


@pytest.fixture(scope="module")
def family(short_ref, params):
    sb = sector_slopes(short_ref, params)
    return linearize_family(short_ref, params, sb.k_sigma(), sample_every=20)


class TestPolytope:
    def test_selection_ranks_scale_free(self, family):
        times, a_stack, b_stack = family
        descriptors, n_varying = select_varying_parameters(a_stack, b_stack,
                                                           count=6)
        assert len(descriptors) == 8
        # the two heading-kinematics entries are always appended last
        tail = [(d.matrix, d.row, d.col) for d in descriptors[-2:]]
        assert tuple(tail) == HEADING_ENTRIES
        for d in descriptors:
            assert d.low <= d.high

    def test_polytope_vertices(self, family):
        times, a_stack, b_stack = family
        descriptors, n_varying = select_varying_parameters(a_stack, b_stack,
                                                           count=6)
        poly = build_polytope(a_stack, b_stack, descriptors, n_varying)
        assert poly.n_vertices == 2 ** 8
        a0, _ = poly.vertex(0)
        a_all, _ = poly.vertex(2 ** 8 - 1)
        for i, d in enumerate(descriptors):
            if d.matrix == "A":
                assert a0[d.row, d.col] == pytest.approx(d.low)
                assert a_all[d.row, d.col] == pytest.approx(d.high)
        # bit i of the index toggles descriptor i alone
        d0 = descriptors[0]
        a1, _ = poly.vertex(1)
        if d0.matrix == "A":
            assert a1[d0.row, d0.col] == pytest.approx(d0.high)
        diff = np.abs(a1 - a0)
        assert np.count_nonzero(diff > 1e-12) <= 1

    def test_too_many_parameters_guard(self, family):
        times, a_stack, b_stack = family
        descriptors = [ParameterDescriptor("A", 0, 0, -1.0, 1.0)] * 13
        with pytest.raises(TooManyParameters):
            build_polytope(a_stack, b_stack, descriptors, 13)

    def test_json_round_trip(self, family, tmp_path):
        times, a_stack, b_stack = family
        descriptors, n_varying = select_varying_parameters(a_stack, b_stack,
                                                           count=6)
        poly = build_polytope(a_stack, b_stack, descriptors, n_varying)
        path = tmp_path / "poly.json"
        poly.to_json(path)
        back = PolytopicModel.from_json(path)
        np.testing.assert_array_equal(back.base_a, poly.base_a)
        assert back.n_vertices == poly.n_vertices
        for i in (0, 17, 255):
            a1, b1 = poly.vertex(i)
            a2, b2 = back.vertex(i)
            np.testing.assert_array_equal(a1, a2)
            np.testing.assert_array_equal(b1, b2)

    def test_pipeline_runs(self, short_ref, params):
        poly, sectors, times, a_stack, b_stack = polytope_from_reference(
            short_ref, params, sample_every=25)
        assert poly.n_vertices == 256
        assert a_stack.shape[1:] == (8, 8)
        assert b_stack.shape[1:] == (8, 3)
