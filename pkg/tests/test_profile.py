"""Tests for the ground-state profile against the sech oracle."""

import numpy as np
import pytest

from app.core.errors import ConfigError
from app.core.field import SpectralGrid
from app.core.nonlinearity import check_existence
from app.core.profile import asymptotic_amplitude, d_omega_profile, solve_profile, stability_margin, tail_fit


def sech(x):
    return 1.0 / np.cosh(x)


class TestCubicProfile:
    def test_matches_sech(self, cubic_profile):
        x = np.linspace(-20.0, 20.0, 4001)
        assert np.max(np.abs(cubic_profile.sample(x) - sech(x))) <= 1e-8

    def test_constants(self, cubic_profile):
        assert cubic_profile.y0 == pytest.approx(1.0, abs=1e-10)
        assert cubic_profile.mass == pytest.approx(2.0, abs=1e-6)
        assert cubic_profile.a_inf == pytest.approx(2.0, abs=1e-3)
        assert cubic_profile.decay_rate == pytest.approx(1.0, abs=1e-3)

    def test_asymptotic_amplitude(self, cubic_profile):
        assert asymptotic_amplitude(cubic_profile) == pytest.approx(2.0, abs=1e-3)
        fit = tail_fit(cubic_profile)
        assert fit.decay_rate == pytest.approx(1.0, abs=1e-3)
        assert fit.points >= 1

    def test_metadata_keys(self, cubic_profile):
        assert set(cubic_profile.metadata()) == {"omega", "y0", "a_inf", "mass"}

    def test_even(self, cubic_profile):
        x = np.linspace(0.0, 15.0, 301)
        np.testing.assert_array_equal(cubic_profile.sample(x), cubic_profile.sample(-x))

    def test_derivative(self, cubic_profile):
        x = np.linspace(-15.0, 15.0, 601)
        expected = -sech(x) * np.tanh(x)
        assert np.max(np.abs(cubic_profile.sample_derivative(x) - expected)) <= 1e-7

    def test_d_omega(self, cubic_profile):
        x = np.linspace(-15.0, 15.0, 601)
        expected = 0.5 * sech(x) - 0.5 * x * sech(x) * np.tanh(x)
        assert np.max(np.abs(cubic_profile.sample_d_omega(x) - expected)) <= 1e-6

    def test_d_omega_default_abscissa(self, cubic):
        values = d_omega_profile(cubic, 1.0)
        assert values.shape == (4097,)

    def test_scaling_in_omega(self, cubic):
        profile = solve_profile(cubic, 4.0)
        x = np.linspace(-10.0, 10.0, 2001)
        assert np.max(np.abs(profile.sample(x) - 2.0 * sech(2.0 * x))) <= 1e-7
        assert profile.mass == pytest.approx(4.0, abs=1e-6)

    def test_stability_margin(self, cubic):
        assert stability_margin(cubic, 1.0) == pytest.approx(1.0, abs=1e-4)


class TestGeneralProfile:
    def test_crest_matches_existence_root(self, cubic_quintic, cubic_quintic_profile):
        assert cubic_quintic_profile.y0 == pytest.approx(check_existence(cubic_quintic, 1.0).y0, abs=1e-12)

    def test_solves_the_profile_equation(self, cubic_quintic, cubic_quintic_profile):
        grid = SpectralGrid(1024, 80.0)
        phi = grid.sample(cubic_quintic_profile.sample)
        residual = -phi.derivative(2).values + phi.values - cubic_quintic.dF(np.abs(phi.values) ** 2) * phi.values
        assert np.max(np.abs(residual)) <= 1e-6

    def test_stability_margin_positive(self, cubic_quintic):
        assert stability_margin(cubic_quintic, 1.0) > 0.0


class TestProfileErrors:
    def test_nonpositive_omega(self, cubic):
        with pytest.raises(ConfigError):
            solve_profile(cubic, -1.0)

    def test_too_few_samples(self, cubic):
        with pytest.raises(ConfigError):
            solve_profile(cubic, 1.0, n=100)

    def test_short_window(self, cubic):
        with pytest.raises(ConfigError):
            solve_profile(cubic, 1.0, half_length=5.0)
