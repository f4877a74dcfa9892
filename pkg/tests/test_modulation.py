"""Tests for the modulation fit, the remainder and its Lyapunov diagnostics."""

import numpy as np
import pytest

from app.core.ansatz import InteractionDynamics
from app.core.errors import ConfigError, InsufficientSamples, NoConvergence
from app.core.field import SolitonParams, inner
from app.core.modulation import (
    ModulationModel,
    ModulationState,
    constraint_basis,
    cutoff,
    fit,
    localized_momenta,
    lyapunov,
    project_remainder,
    rate_check,
    remainder,
)

BASE = SolitonParams(zeta=8.0, v=0.2, gamma=0.3, omega=1.0)
MOVED = SolitonParams(zeta=8.02, v=0.201, gamma=0.35, omega=1.0)


@pytest.fixture(scope="module")
def model(cubic_profile, grid):
    return ModulationModel(cubic_profile, grid)


@pytest.fixture(scope="module")
def fitted(model, cubic_profile):
    u = model.field(MOVED)
    return u, fit(u, BASE, cubic_profile, t=0.0)


def zero_state(params=BASE, t=0.0):
    return ModulationState(base=params, shifts=(0.0, 0.0, 0.0, 0.0), residual_norm=0.0, t=t)


class TestFit:
    def test_recovers_known_shifts(self, fitted):
        _, state = fitted
        np.testing.assert_allclose(state.shifts, [0.02, 0.001, 0.05, 0.0], atol=1e-8)
        assert state.remainder_h1 <= 1e-8
        assert state.iterations >= 1

    def test_model_field_is_odd(self, model):
        u = model.field(BASE)
        np.testing.assert_allclose(u.values, -u.mirror().values, atol=1e-14)

    def test_remainder_vanishes_on_the_model(self, fitted, cubic_profile):
        u, state = fitted
        assert remainder(u, state, cubic_profile).h1() <= 1e-8

    def test_zero_field_is_outside_the_basin(self, cubic_profile, grid):
        with pytest.raises(NoConvergence):
            fit(grid.zeros(), BASE, cubic_profile)

    def test_order_one_needs_an_ansatz(self, model, cubic_profile):
        with pytest.raises(ConfigError):
            fit(model.field(BASE), BASE, cubic_profile, order=1)

    def test_row(self, fitted):
        _, state = fitted
        assert set(state.as_row()) == {"t", "p_zeta", "p_v", "p_gamma", "p_omega", "residual"}
        assert state.params.zeta == pytest.approx(8.02, abs=1e-8)


class TestLyapunov:
    def test_zero_remainder(self, cubic_profile, grid):
        diagnostics = lyapunov(grid.zeros(), zero_state(), cubic_profile, d_dot=0.2)
        assert diagnostics.as_row() == {"L": 0.0, "P1": 0.0, "P2": 0.0, "E": 0.0, "r_H1": 0.0}

    def test_localized_momenta_need_separation(self, grid):
        with pytest.raises(ConfigError):
            localized_momenta(grid.zeros(), 0.0)

    def test_cutoff(self):
        np.testing.assert_allclose(cutoff(np.array([0.0, 0.5, 0.55, 0.6, 1.0])), [1.0, 1.0, 0.5, 0.0, 0.0])


class TestProjection:
    def test_constraint_basis(self, cubic_profile, grid):
        basis = constraint_basis(zero_state(), cubic_profile, grid)
        assert len(basis.vectors) == 8
        assert basis.names[0] == "gamma+"
        assert basis.names[-1] == "v-"

    def test_projected_remainder_is_orthogonal(self, cubic_profile, grid, rng):
        x = grid.x
        coefficients = rng.normal(size=4)
        r = grid.field(
            ((coefficients[0] + 1j * coefficients[1]) * np.exp(-((x - 8.0) ** 2))
             + (coefficients[2] + 1j * coefficients[3]) * np.exp(-((x + 7.0) ** 2)))
        )
        state = zero_state()
        projected = project_remainder(r, state, cubic_profile)
        rotated = projected * np.exp(1j * state.params.gamma)
        for e in constraint_basis(state, cubic_profile, grid).vectors:
            assert abs(inner(rotated, e)) <= 1e-10 * r.norm() * e.norm()


class TestRateCheck:
    @pytest.fixture
    def dynamics(self):
        return InteractionDynamics(C=16.0, omega=1.0, v=0.2)

    def test_zero_shifts(self, dynamics):
        states = [zero_state(t=float(t)) for t in np.arange(12)]
        report = rate_check(states, dynamics)
        assert not any(report.violated.values())
        assert np.isnan(report.C1)
        assert len(report.rows()) == 12
        assert set(report.to_dict()) == {"C1", "C2", "C3", "max_ratio", "violated"}

    def test_needs_ten_states(self, dynamics):
        with pytest.raises(InsufficientSamples):
            rate_check([zero_state(t=float(t)) for t in range(5)], dynamics)

    def test_needs_uniform_times(self, dynamics):
        times = [0.0, 1.0, 2.0, 3.5, 4.0, 5.0, 6.0, 7.0, 8.0, 9.0]
        with pytest.raises(ConfigError):
            rate_check([zero_state(t=t) for t in times], dynamics)
