"""Tests for prepared collision data and the collision, sweep and orbital experiments."""

import numpy as np
import pytest

from app.core.errors import ConfigError
from app.core.experiments import (
    CollisionTracker,
    fitting_grid,
    odd_perturbation,
    orbital_window,
    prepare,
    residual_scaling,
    run_collision,
    sweep,
)
from app.core.field import oddness_residual
from app.core.modulation import fit
from app.models.lab_config import CollisionConfig, GridSpec, NonlinearitySpec, OrbitalConfig, SweepConfig, TimeSpec


class TestFittingGrid:
    def test_default_resolution_is_stretched(self):
        grid = fitting_grid(100.0)
        assert grid.length == 100.0
        assert grid.n == 4096

    def test_default_is_kept_when_long_enough(self):
        grid = fitting_grid(50.0)
        assert (grid.n, grid.length) == (2048, 80.0)

    def test_configured_grid_too_short(self):
        with pytest.raises(ConfigError):
            fitting_grid(100.0, GridSpec(n=1024, L=80.0))
        assert fitting_grid(50.0, GridSpec(n=1024, L=80.0)).n == 1024


class TestPrepare:
    @pytest.fixture(scope="class")
    def prepared(self):
        return prepare(CollisionConfig(v=0.2, order=0))

    def test_data_is_odd(self, prepared):
        assert oddness_residual(prepared.u0) <= 1e-14

    def test_starts_separated(self, prepared):
        v = 0.2
        assert prepared.t_start <= -prepared.t_separated
        assert prepared.t_end == pytest.approx(-prepared.t_start)
        d_start = float(prepared.dynamics.separation(prepared.t_start)[0])
        assert d_start >= np.log(1.0 / v**2)
        assert float(prepared.dynamics.interaction(prepared.t_start)) <= 1e-3 * v**2

    def test_residual_is_small(self, prepared):
        assert prepared.residual_h1 <= 1e-3

    def test_late_start(self):
        with pytest.raises(ConfigError):
            prepare(CollisionConfig(v=0.2, order=0, time=TimeSpec(t_start=-1.0)))


class TestCollisionTracker:
    def test_order_one_data_fit_the_corrected_model(self):
        prepared = prepare(CollisionConfig(v=0.2, order=1))
        tracker = CollisionTracker(prepared)
        row = tracker(prepared.t_start, prepared.u0)
        assert tracker.order == 1
        assert row["method"] == 0.0
        corrected = tracker.last_state.remainder_h1
        reference = prepared.approx.params(prepared.t_start)
        bare = fit(prepared.u0, reference, prepared.profile, t=prepared.t_start).remainder_h1
        assert corrected <= 0.1 * bare

    def test_order_zero_data_use_the_bare_model(self):
        prepared = prepare(CollisionConfig(v=0.2, order=0))
        tracker = CollisionTracker(prepared)
        tracker(prepared.t_start, prepared.u0)
        assert tracker.ansatz is None
        assert tracker.last_state.remainder_h1 <= 1e-6


class TestOddPerturbation:
    def test_size_and_parity(self, grid):
        g = odd_perturbation(grid, 10.0, 1e-3, seed=7)
        assert g.h1() == pytest.approx(1e-3)
        assert oddness_residual(g) <= 1e-14

    def test_reproducible(self, grid):
        a = odd_perturbation(grid, 10.0, 1e-3, seed=7)
        b = odd_perturbation(grid, 10.0, 1e-3, seed=7)
        np.testing.assert_array_equal(a.values, b.values)

    def test_zero_size(self, grid):
        assert odd_perturbation(grid, 10.0, 0.0, seed=7).h1() == 0.0


class TestResidualScaling:
    def test_order_zero_only(self, cubic):
        results = residual_scaling(cubic, 1.0, [0.1, 0.2], orders=[0])
        assert list(results) == ["0"]
        assert results["0"].variant is None
        assert len(results["0"].rows()) == 2


@pytest.mark.slow
class TestCollision:
    @pytest.fixture(scope="class")
    def report(self):
        return run_collision(CollisionConfig(v=0.2))

    def test_cubic_is_elastic(self, report):
        assert report.inelasticity <= 1e-3
        assert report.v_in == pytest.approx(0.2, rel=1e-2)

    def test_conservation(self, report):
        assert report.drift["Q_rel"] <= 1e-8
        assert report.drift["H_rel"] <= 1e-4
        assert report.max_oddness <= 1e-10

    def test_half_line_momentum_increases(self, report):
        assert report.half_momentum_min_increment >= -1e-8

    def test_remainder(self, report):
        assert report.remainder_H1_final <= 1e-2
        assert {"L", "P1", "P2", "E"} <= set(report.final_lyapunov)


@pytest.mark.slow
class TestSweep:
    def test_cubic_quintic_trend(self):
        config = SweepConfig(
            nonlinearity=NonlinearitySpec(kind="cubic_quintic", a=2.0, b=0.1),
            v_list=[0.1, 0.15, 0.2, 0.3],
            max_workers=4,
        )
        result = sweep(config)
        assert not result.failures
        assert result.fitted_slope >= 3.0
        assert result.remainder_slope >= 2.0


@pytest.mark.slow
class TestOrbitalWindow:
    def test_bounds_hold(self):
        report = orbital_window(OrbitalConfig(v=0.2, window=20.0, perturbation=1e-6))
        assert report.bound_holds
        assert report.speed_holds
        assert report.initial_remainder_H1 <= 1e-5


class TestOrbitalPreconditions:
    def test_perturbation_must_stay_below_v5(self):
        with pytest.raises(ConfigError):
            orbital_window(OrbitalConfig(v=0.2, perturbation=0.5))
        with pytest.raises(ConfigError):
            orbital_window(OrbitalConfig(v=0.2, perturbation=0.2**5))

    def test_initial_separation_must_reach_threshold(self):
        with pytest.raises(ConfigError):
            orbital_window(OrbitalConfig(v=0.2, perturbation=1e-6, zeta0=1.0))
        threshold = 16.0 * np.log(5.0)
        with pytest.raises(ConfigError):
            orbital_window(OrbitalConfig(v=0.2, perturbation=1e-6, zeta0=0.99 * threshold))
