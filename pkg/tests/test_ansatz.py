"""Tests for the interaction dynamics, the two-soliton ansatz and its refinement."""

import numpy as np
import pytest

from app.core.ansatz import (
    ApproximateSolution,
    InteractionDynamics,
    SingleSoliton,
    build,
    corrections,
    fit_slope,
    interaction_constant,
    interaction_routes,
    refine_numeric,
    residual,
    residual_slope,
    select_correction_variant,
    smoothstep,
    _refine_at,
)
from app.core.errors import ConfigError, GridMismatch, InsufficientSamples, WrapAround
from app.core.field import SpectralGrid, inner, oddness_residual, physical_norm
from app.core.linop import LinearizedOperator
from app.core.profile import solve_profile


@pytest.fixture(scope="module")
def dynamics():
    return InteractionDynamics(C=16.0, omega=1.0, v=0.2)


@pytest.fixture(scope="module")
def balanced(cubic_profile, cubic_operator):
    return corrections(cubic_profile, None, cubic_operator, "balanced")


class TestInteractionConstant:
    def test_cubic(self, cubic_profile):
        assert interaction_constant(cubic_profile) == pytest.approx(16.0, rel=1e-3)

    def test_scales_with_omega(self, cubic):
        assert interaction_constant(solve_profile(cubic, 4.0)) == pytest.approx(128.0, rel=1e-3)

    def test_routes_agree(self, cubic_quintic_profile):
        routes = interaction_routes(cubic_quintic_profile)
        assert routes["route_integral"] == pytest.approx(routes["route_tail"], rel=1e-5)
        assert routes["integral"] == pytest.approx(routes["identity"], rel=1e-5)

    def test_mismatched_nonlinearity(self, cubic_profile, cubic_quintic):
        with pytest.raises(ConfigError):
            interaction_constant(cubic_profile, cubic_quintic)


class TestInteractionDynamics:
    def test_validation(self):
        with pytest.raises(ConfigError):
            InteractionDynamics(C=-1.0, omega=1.0, v=0.1)
        with pytest.raises(ConfigError):
            InteractionDynamics(C=16.0, omega=1.0, v=0.0)

    def test_closed_form_solves_ode(self, dynamics):
        t = np.linspace(-1000.0, 1000.0, 2001)
        assert np.max(np.abs(dynamics.ode_residual(t))) <= 1e-12

    def test_even_with_asymptotic_speed(self, dynamics):
        d, d_dot, _ = dynamics.separation(np.array([-300.0, 300.0]))
        assert d[0] == pytest.approx(d[1])
        assert d_dot[1] == pytest.approx(0.2, rel=1e-10)
        assert d_dot[0] == pytest.approx(-0.2, rel=1e-10)

    def test_closest_approach(self, dynamics):
        assert dynamics.d0 == pytest.approx(np.log(4.0 / 0.2))

    def test_integrate_matches_closed_form(self, dynamics):
        t = np.array([-50.0, -10.0, 0.0, 10.0, 50.0])
        d, d_dot = dynamics.integrate(t)
        exact, exact_dot, _ = dynamics.separation(t)
        np.testing.assert_allclose(d, exact, atol=1e-8)
        np.testing.assert_allclose(d_dot, exact_dot, atol=1e-8)

    def test_time_to_separation(self, dynamics):
        T = dynamics.time_to_separation(1e-3)
        assert T > 0.0
        assert dynamics.interaction(T) == pytest.approx(1e-3 * 0.2**2, rel=1e-8)

    def test_phase_rate(self, dynamics):
        h = 1e-4
        numeric = (dynamics.phase(3.0 + h) - dynamics.phase(3.0 - h)) / (2.0 * h)
        assert numeric == pytest.approx(dynamics.phase_rate(3.0), abs=1e-6)


class TestSmoothstep:
    def test_values(self):
        np.testing.assert_allclose(smoothstep(np.array([-1.0, 0.0, 0.5, 1.0, 2.0])), [0.0, 0.0, 0.5, 1.0, 1.0])


class TestApproximateSolution:
    def test_order_zero_is_odd(self, cubic_profile, dynamics, grid):
        u = build(0, cubic_profile, dynamics, grid, t=-5.0)
        assert oddness_residual(u) <= 1e-12

    def test_order_one_is_odd(self, cubic_profile, dynamics, grid, balanced):
        approx = ApproximateSolution(1, cubic_profile, dynamics, grid, correction_set=balanced)
        assert oddness_residual(approx.field(2.0)) <= 1e-12
        assert approx.variant == "balanced"

    def test_exact_single_soliton(self, cubic_profile, grid):
        approx = SingleSoliton(cubic_profile, 0.2, grid, zeta0=-3.0)
        assert approx.residual(4.0).h1() <= 1e-6

    def test_order_zero_residual_scales_with_v(self, cubic_profile, grid):
        norms = [
            ApproximateSolution(0, cubic_profile, InteractionDynamics(16.0, 1.0, v), grid).residual(0.0).h1()
            for v in (0.1, 0.2)
        ]
        assert norms[1] / norms[0] > 2.5

    def test_order_one_improves_on_order_zero(self, cubic_profile, grid, balanced):
        dyn = InteractionDynamics(16.0, 1.0, 0.1)
        base = ApproximateSolution(0, cubic_profile, dyn, grid).residual(0.0).h1()
        corrected = ApproximateSolution(1, cubic_profile, dyn, grid, correction_set=balanced).residual(0.0).h1()
        assert corrected < base

    def test_wraparound(self, cubic_profile, dynamics, small_grid):
        with pytest.raises(WrapAround):
            build(0, cubic_profile, dynamics, small_grid, t=-100.0)

    def test_rejects_bad_order_and_grid(self, cubic_profile, dynamics, grid, small_grid):
        with pytest.raises(ConfigError):
            ApproximateSolution(2, cubic_profile, dynamics, grid)
        approx = ApproximateSolution(0, cubic_profile, dynamics, grid)
        with pytest.raises(ConfigError):
            residual(approx, 0.0, grid=small_grid)

    def test_unknown_variant(self, cubic_profile, cubic_operator):
        with pytest.raises(ConfigError):
            corrections(cubic_profile, None, cubic_operator, "sideways")

    def test_corrections_are_real_and_imaginary(self, balanced):
        assert np.all(balanced.p1.values.imag == 0.0)
        assert np.all(balanced.p2.values.real == 0.0)
        assert np.all(balanced.p3.values.real == 0.0)

    def test_corrections_avoid_the_kernel(self, balanced, cubic_operator):
        for p in (balanced.p1, balanced.p2, balanced.p3):
            for k in cubic_operator.kernel:
                assert abs(inner(p, k)) <= 1e-8 * max(physical_norm(p), 1.0) * physical_norm(k)


class TestRefinement:
    def test_exact_solution_is_untouched(self, cubic_profile, cubic_operator, grid):
        approx = SingleSoliton(cubic_profile, 0.2, grid, zeta0=0.0)
        refined = refine_numeric(approx, cubic_operator, [0.0])
        step = refined.steps[0.0]
        assert step.q.norm() <= 1e-6
        assert max(abs(r) for r in step.rates) <= 1e-6

    def test_refine_reduces_order_zero_residual(self, cubic_profile, cubic_operator, grid):
        approx = ApproximateSolution(0, cubic_profile, InteractionDynamics(16.0, 1.0, 0.1), grid)
        refined = refine_numeric(approx, cubic_operator, [0.0])
        step = refined.steps[0.0]
        assert step.refined_norm <= 0.5 * step.base_norm

    def test_untabulated_time(self, cubic_profile, cubic_operator, grid):
        approx = ApproximateSolution(0, cubic_profile, InteractionDynamics(16.0, 1.0, 0.1), grid)
        refined = refine_numeric(approx, cubic_operator, [0.0], require_improvement=False)
        with pytest.raises(ConfigError):
            refined.field(1.0)

    def test_needs_times_and_matching_grid(self, cubic_profile, cubic_operator, small_grid, grid):
        approx = ApproximateSolution(0, cubic_profile, InteractionDynamics(16.0, 1.0, 0.1), grid)
        with pytest.raises(InsufficientSamples):
            refine_numeric(approx, cubic_operator, [])
        other = ApproximateSolution(0, cubic_profile, InteractionDynamics(16.0, 1.0, 0.1), small_grid)
        with pytest.raises(ConfigError):
            refine_numeric(other, cubic_operator, [0.0])

    def test_rate_balance_rejects_operator_on_another_grid(self, cubic_profile, small_grid):
        approx = ApproximateSolution(0, cubic_profile, InteractionDynamics(16.0, 1.0, 0.1), small_grid)
        S = LinearizedOperator(cubic_profile, SpectralGrid(1024, 60.0))
        with pytest.raises(GridMismatch):
            _refine_at(approx, S, 0.0)


class TestFitSlope:
    def test_power_law(self):
        x = np.array([0.1, 0.2, 0.4, 0.8])
        slope, stderr = fit_slope(x, 3.0 * x**3)
        assert slope == pytest.approx(3.0)
        assert stderr <= 1e-10

    def test_needs_two_points(self):
        with pytest.raises(InsufficientSamples):
            fit_slope([0.1], [1.0])


@pytest.mark.slow
class TestResidualScaling:
    V_LIST = [0.05, 0.1, 0.2, 0.3]

    def test_order_zero(self, cubic_profile, cubic_operator):
        scaling = residual_slope(cubic_profile, cubic_operator, self.V_LIST, 0)
        assert scaling.slope == pytest.approx(2.0, abs=0.2)

    def test_order_one(self, cubic_profile, cubic_operator, balanced):
        scaling = residual_slope(cubic_profile, cubic_operator, self.V_LIST, 1, correction_set=balanced)
        assert scaling.slope >= 3.5

    def test_refined(self, cubic_profile, cubic_operator):
        scaling = residual_slope(cubic_profile, cubic_operator, self.V_LIST, "refined")
        assert scaling.slope >= 3.5
        assert len(scaling.rows()) == 4

    def test_cubic_quintic_order_one(self, cubic_quintic_profile, grid):
        S = LinearizedOperator(cubic_quintic_profile, grid)
        scaling = residual_slope(cubic_quintic_profile, S, self.V_LIST, 1, variant="balanced")
        assert scaling.slope >= 3.5

    def test_variant_selection(self, cubic_profile, cubic_operator):
        variant, slopes = select_correction_variant(cubic_profile, cubic_operator, self.V_LIST)
        assert variant in ("displayed", "balanced")
        assert slopes[variant] >= 3.5
