"""Tests for the split-step integrator and the conserved quantities."""

import numpy as np
import pytest

from app.config.settings import settings
from app.core import evolve
from app.core.ansatz import SingleSoliton
from app.core.errors import ConfigError, NonFinite, NotOdd
from app.core.evolve import EvolutionConfig, center_of_mass, conserved, half_quantities
from app.core.experiments import time_reversal_error
from app.core.field import SolitonParams, oddness_residual, place, sym


@pytest.fixture(scope="module")
def moving_soliton(cubic_profile, grid):
    return SingleSoliton(cubic_profile, 0.2, grid, zeta0=-5.0)


class TestEvolutionConfig:
    def test_steps(self):
        assert EvolutionConfig(t_end=1.0, dt=1e-3).n_steps == 1000

    def test_backward_needs_negative_dt(self):
        with pytest.raises(ConfigError):
            EvolutionConfig(t_end=-1.0, t_begin=0.0, dt=1e-3)
        assert EvolutionConfig(t_end=-1.0, t_begin=0.0, dt=-1e-3).n_steps == 1000

    def test_rejects_zero_dt_and_unknown_scheme(self):
        with pytest.raises(ConfigError):
            EvolutionConfig(t_end=1.0, dt=0.0)
        with pytest.raises(ConfigError):
            EvolutionConfig(t_end=1.0, dt=1e-3, scheme="euler")


class TestSingleSoliton:
    @pytest.mark.parametrize("scheme", ["strang", "yoshida4"])
    def test_conservation_and_tracking(self, cubic, moving_soliton, scheme):
        config = EvolutionConfig(t_end=5.0, dt=1e-3, snapshot_stride=1000, scheme=scheme)
        trajectory = evolve.run(moving_soliton.field(0.0), config, cubic)
        series = [conserved(u, cubic) for u in trajectory.snapshots]
        drift = evolve.drift(series)
        assert drift["Q_rel"] <= 1e-10
        assert drift["H_rel"] <= 1e-6
        final = trajectory.final
        assert trajectory.times[-1] == pytest.approx(5.0)
        assert abs(center_of_mass(final) - moving_soliton.params(5.0).zeta) <= 1e-4
        assert evolve.shape_error(final, moving_soliton.field(5.0)) <= 1e-5

    def test_observers_and_callback(self, cubic, moving_soliton):
        seen = []
        config = EvolutionConfig(t_end=0.5, dt=1e-3, snapshot_stride=100)
        trajectory = evolve.run(
            moving_soliton.field(0.0),
            config,
            cubic,
            observers={"mass": lambda t, u: {"t": t, "Q": conserved(u, cubic).Q}},
            keep_snapshots=False,
            callback=lambda t, u: seen.append(t),
        )
        assert len(trajectory.observations["mass"]) == 6
        assert len(trajectory.snapshots) == 1
        assert seen == trajectory.times
        np.testing.assert_allclose(trajectory.series("mass", "Q"), 2.0, rtol=1e-6)

    def test_time_reversal(self, cubic, moving_soliton):
        config = EvolutionConfig(t_end=1.0, dt=1e-3, snapshot_stride=1000)
        u0 = moving_soliton.field(0.0)
        u1 = evolve.run(u0, config, cubic, keep_snapshots=False).final
        assert time_reversal_error(u0, u1, config, cubic) <= 1e-9

    @pytest.mark.parametrize("scheme, order", [("strang", 2), ("yoshida4", 4)])
    def test_halving_dt_reduces_error_at_scheme_order(self, cubic, moving_soliton, scheme, order):
        dt = 0.04
        u0 = moving_soliton.field(0.0)

        def final(h):
            config = EvolutionConfig(t_end=1.0, dt=h, snapshot_stride=10_000, scheme=scheme)
            return evolve.run(u0, config, cubic, keep_snapshots=False).final

        reference = final(dt / 8)
        coarse = evolve.relative_distance(final(dt), reference)
        fine = evolve.relative_distance(final(dt / 2), reference)
        # errors measured against dt/8: (1 - 8^-p) / (2^-p - 8^-p)
        expected = (1.0 - 8.0**-order) / (2.0**-order - 8.0**-order)
        assert coarse > 1e-10
        assert coarse / fine == pytest.approx(expected, rel=0.1)

    def test_non_finite_keeps_partial_trajectory(self, cubic, moving_soliton):
        u0 = moving_soliton.field(0.0)
        u0.values[10] = np.nan
        config = EvolutionConfig(t_end=3e-3, dt=1e-3, snapshot_stride=1)
        with pytest.raises(NonFinite) as info:
            evolve.run(u0, config, cubic)
        assert info.value.trajectory is not None
        assert info.value.trajectory.times == [0.0]


class TestHalfLine:
    @pytest.fixture(scope="class")
    def odd_pair(self, cubic_profile, grid):
        p = SolitonParams(zeta=10.0, v=-0.2, gamma=0.0, omega=1.0)
        return sym(place(cubic_profile.sample, p, grid))

    def test_requires_odd_field(self, cubic, cubic_profile, grid):
        even = grid.sample(cubic_profile.sample)
        with pytest.raises(NotOdd):
            half_quantities(even, cubic)

    def test_oddness_tolerance_is_a_setting(self, cubic, cubic_profile, grid, odd_pair, monkeypatch):
        nearly_odd = odd_pair + grid.sample(cubic_profile.sample) * 1e-6
        with pytest.raises(NotOdd):
            half_quantities(nearly_odd, cubic)
        monkeypatch.setattr(settings, "ODDNESS_TOL", 1e-4)
        assert half_quantities(nearly_odd, cubic).Q_plus > 0.0

    def test_half_of_the_totals(self, cubic, odd_pair):
        assert oddness_residual(odd_pair) == 0.0
        half = half_quantities(odd_pair, cubic)
        total = conserved(odd_pair, cubic)
        assert half.Q_plus == pytest.approx(0.5 * total.Q, rel=1e-10)
        assert half.momentum_rate == pytest.approx(2.0 * half.boundary_flux)
        assert set(half.as_dict()) == {"Q_plus", "H_plus", "M_plus", "flux", "momentum_rate"}

    def test_half_line_centroid(self, odd_pair):
        assert center_of_mass(odd_pair, half_line=True) == pytest.approx(10.0, abs=1e-6)
        assert center_of_mass(odd_pair) == pytest.approx(0.0, abs=1e-10)

    def test_observer_row(self, cubic, odd_pair):
        row = evolve.observer_row(1.5, odd_pair, cubic)
        assert row["t"] == 1.5
        assert row["oddness_residual"] == 0.0
        assert row["Q"] == pytest.approx(4.0, rel=1e-6)
