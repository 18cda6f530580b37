import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from lpvtrack.errors import DegenerateSpeed, InvalidBounds, NonpositiveLoad
from lpvtrack.params import TireParams, VehicleInput, VehicleParams, VehicleState
from lpvtrack.tires import (
    SlipState, TireForceSet, circle_saturate, effective_stiffness, logistic,
    saturate_forces, slip_quantities, star_coefficients, unsaturated_forces,
)

TIRE = TireParams()


def rolling_state(v, params, du=0.0, r=0.0):
    st_ = VehicleState.rolling(v, params)
    st_.u, st_.r = du, r
    return st_


class TestSlipQuantities:
    def test_pure_rolling_zero_slip(self, params):
        s = slip_quantities(rolling_state(20.0, params), VehicleInput(), params)
        assert s.kappa_f == pytest.approx(0.0, abs=1e-15)
        assert s.kappa_r == pytest.approx(0.0, abs=1e-15)
        assert s.alpha_f == pytest.approx(0.0, abs=1e-15)
        assert s.alpha_r == pytest.approx(0.0, abs=1e-15)

    def test_alpha_f_equals_steering_without_lateral_motion(self, params):
        # wheels pure-rolling in the wheel frame: match the front wheel
        # tangential speed to the wheel-frame longitudinal speed
        delta = 0.05
        st_ = VehicleState.rolling(20.0, params)
        st_.omega_wf = 20.0 * np.cos(delta) / params.tire.r_e
        s = slip_quantities(st_, VehicleInput(delta_f=delta), params)
        assert s.alpha_f == pytest.approx(delta, abs=1e-12)
        assert s.kappa_f == pytest.approx(0.0, abs=1e-12)

    def test_front_slip_angle_frozen_value(self, params):
        # v=20, u=1, r=0.1, ell_f=1.2, delta=0.03; independent evaluation
        # of delta - atan((u + ell_f r)/v) at 30 decimal digits
        st_ = rolling_state(20.0, params, du=1.0, r=0.1)
        s = slip_quantities(st_, VehicleInput(delta_f=0.03), params)
        assert s.alpha_f == pytest.approx(-0.0259415712335609542, rel=1e-14)

    def test_degenerate_speed_raises(self, params):
        with pytest.raises(DegenerateSpeed):
            slip_quantities(rolling_state(0.1, params), VehicleInput(), params)


class TestStarCoefficients:
    def test_alpha_star_formula(self):
        _, alpha_star = star_coefficients(TIRE, 5000.0)
        assert alpha_star == pytest.approx(5000.0 / (2.0 * 60000.0), rel=1e-15)

    def test_frozen_values(self):
        # mpmath evaluation at 30 and 60 digits agrees on these
        kappa_star, alpha_star = star_coefficients(TIRE, 5000.0)
        assert kappa_star == pytest.approx(0.03728409018144558, rel=1e-14)
        assert alpha_star == pytest.approx(0.041666666666666664, rel=1e-14)

    def test_vanishing_load_limit(self):
        kappa_star, alpha_star = star_coefficients(TIRE, 1e-9)
        assert 0.0 < kappa_star < 1e-10
        assert 0.0 < alpha_star < 1e-12

    def test_alpha_star_linear_in_load(self):
        _, a1 = star_coefficients(TIRE, 4000.0)
        _, a2 = star_coefficients(TIRE, 8000.0)
        assert a2 == pytest.approx(2.0 * a1, rel=1e-14)

    def test_nonpositive_load_raises(self):
        with pytest.raises(NonpositiveLoad):
            star_coefficients(TIRE, 0.0)

    @given(load=st.floats(1.0, 2e4))
    def test_positivity(self, load):
        kappa_star, alpha_star = star_coefficients(TIRE, load)
        assert kappa_star > 0.0 and alpha_star > 0.0


class TestEffectiveStiffness:
    def test_frozen_values(self):
        # mpmath oracle, cross-checked at 30 and 60 digits
        ck, ca = effective_stiffness(TIRE, 5000.0, kappa=0.01, alpha=0.02)
        assert ck == pytest.approx(77845.55873113105, rel=1e-12)
        assert ca == pytest.approx(60408.45934751832, rel=1e-12)

    def test_zero_slip_angle_collapse(self):
        n, mu, ckap = 5000.0, TIRE.mu, TIRE.c_kappa
        kappa_star, _ = star_coefficients(TIRE, n)
        expected = n * ckap * mu * (4.0 * ckap * kappa_star + n * mu * (kappa_star - 1.0)) \
            / (4.0 * ckap ** 2 * kappa_star ** 2)
        ck, _ = effective_stiffness(TIRE, n, kappa=0.0, alpha=0.0)
        assert ck == pytest.approx(expected, rel=1e-13)

    def test_zero_slip_ratio_collapse(self):
        n, mu, calp = 5000.0, TIRE.mu, TIRE.c_alpha
        _, alpha_star = star_coefficients(TIRE, n)
        expected = n * calp * mu * (4.0 * alpha_star * calp + n * mu * (0.0 - 1.0)) \
            / (4.0 * alpha_star ** 2 * calp ** 2)
        _, ca = effective_stiffness(TIRE, n, kappa=0.0, alpha=0.1)
        assert ca == pytest.approx(expected, rel=1e-13)

    def test_nonpositive_load_raises(self):
        with pytest.raises(NonpositiveLoad):
            effective_stiffness(TIRE, -1.0, 0.0, 0.0)


class TestLogistic:
    def test_midpoint_fixed_point(self):
        assert logistic(2.0, 5.0, -1.0) == pytest.approx(2.0, abs=1e-14)
        assert logistic(0.0, 3.0, -3.0) == pytest.approx(0.0, abs=1e-14)

    def test_asymptotes(self):
        assert logistic(1e9, 4.0, -4.0) == pytest.approx(4.0, abs=1e-9)
        assert logistic(-1e9, 4.0, -4.0) == pytest.approx(-4.0, abs=1e-9)

    def test_unit_slope_at_midpoint(self):
        # finite-difference check of the centering correction
        eps = 1e-6
        slope = (logistic(2.0 + eps, 7.0, -3.0)
                 - logistic(2.0 - eps, 7.0, -3.0)) / (2 * eps)
        assert slope == pytest.approx(1.0, rel=1e-8)

    def test_invalid_bounds(self):
        with pytest.raises(InvalidBounds):
            logistic(0.0, -1.0, 1.0)

    def test_uncentered_variant_differs(self):
        # the uncorrected form does not fix the midpoint of symmetric bounds
        assert abs(logistic(0.0, 4.0, -4.0, uncentered=True)) > 1.0

    def test_monotone_and_bounded_on_grid(self):
        x = np.linspace(-50.0, 50.0, 1000)
        y = logistic(x, 5.0, -2.0)
        assert np.all(np.diff(y) > 0.0)
        assert np.all(y > -2.0) and np.all(y < 5.0)

    @given(x=st.floats(-1e6, 1e6), upper=st.floats(0.1, 1e4))
    @settings(max_examples=200)
    def test_inside_bounds(self, x, upper):
        # mathematically strict, but float rounding can land on the bound
        y = float(logistic(x, upper, -upper))
        assert -upper <= y <= upper


class TestSaturateForces:
    def test_zero_forces_stay_zero(self):
        out = saturate_forces(TireForceSet(), TIRE.mu, 5000.0, 5000.0)
        assert out.F_xf == out.F_yf == out.F_xr == out.F_yr == 0.0

    def test_deep_longitudinal_saturation(self):
        radius = TIRE.mu * 5000.0
        unsat = TireForceSet(F_xf_hat=10.0 * radius)
        out = saturate_forces(unsat, TIRE.mu, 5000.0, 5000.0)
        assert out.F_xf == pytest.approx(radius, rel=1e-3)
        assert out.F_yf == 0.0

    def test_lateral_takes_circle_remainder(self):
        radius = TIRE.mu * 5000.0
        unsat = TireForceSet(F_xf_hat=0.5 * radius, F_yf_hat=2.0 * radius)
        out = saturate_forces(unsat, TIRE.mu, 5000.0, 5000.0)
        budget = np.sqrt(radius ** 2 - out.F_xf ** 2)
        # the smooth bound approaches the remaining budget from below
        assert 0.95 * budget < out.F_yf <= budget
        assert out.F_xf ** 2 + out.F_yf ** 2 <= radius ** 2 * (1.0 + 1e-9)

    def test_zero_load_zero_forces(self):
        unsat = TireForceSet(F_xf_hat=1000.0, F_yf_hat=-500.0)
        out = saturate_forces(unsat, TIRE.mu, 0.0, 0.0)
        assert out.F_xf == 0.0 and out.F_yf == 0.0

    def test_negative_load_raises(self):
        with pytest.raises(NonpositiveLoad):
            saturate_forces(TireForceSet(), TIRE.mu, -1.0, 100.0)

    @given(fx=st.floats(-1e5, 1e5), fy=st.floats(-1e5, 1e5),
           load=st.floats(0.0, 2e4))
    @settings(max_examples=300)
    def test_friction_circle_never_violated(self, fx, fy, load):
        sx, sy = circle_saturate(fx, fy, TIRE.mu, load)
        assert sx * sx + sy * sy <= (TIRE.mu * load) ** 2 * (1.0 + 1e-9)


class TestUnsaturatedForces:
    def test_zero_slip_nullity(self):
        fx, fy = unsaturated_forces(TIRE, 5000.0, 0.0, 0.0)
        assert fx == 0.0 and fy == 0.0

    def test_lateral_sign_follows_slip_angle(self):
        _, alpha_star = star_coefficients(TIRE, 5000.0)
        for alpha in np.linspace(-0.9, 0.9, 13) * alpha_star:
            if alpha == 0.0:
                continue
            _, fy = unsaturated_forces(TIRE, 5000.0, 0.0, alpha)
            assert np.sign(fy) == np.sign(alpha)
