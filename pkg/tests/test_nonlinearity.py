"""Tests for the polynomial nonlinearity and the existence check."""

import numpy as np
import pytest

from app.core.errors import ConfigError, NoRoot
from app.core.nonlinearity import PolynomialNonlinearity, check_existence


class TestPolynomialNonlinearity:
    def test_cubic_derivatives(self, cubic):
        s = np.array([0.0, 0.5, 2.0])
        np.testing.assert_allclose(cubic.F(s), s**2)
        np.testing.assert_allclose(cubic.dF(s), 2.0 * s)
        np.testing.assert_allclose(cubic.d2F(s), 2.0)

    def test_cubic_quintic_preset(self):
        F = PolynomialNonlinearity.cubic_quintic(2.0, 0.3)
        assert F.dF(0.5) == pytest.approx(2.0 * 0.5 + 0.3 * 0.25)
        assert F.degree == 3

    def test_triple_power_preset(self):
        F = PolynomialNonlinearity.triple_power(1.0, 0.5, 0.25)
        assert F.dF(2.0) == pytest.approx(2.0 + 0.5 * 4.0 + 0.25 * 8.0)

    def test_from_pairs_matches_preset(self):
        F = PolynomialNonlinearity.from_pairs([(2, 1.0), (3, 0.1)])
        assert F == PolynomialNonlinearity((1.0, 0.1))
        assert F.to_pairs() == [(2, 1.0), (3, 0.1)]

    def test_from_pairs_rejects_linear_power(self):
        with pytest.raises(ConfigError):
            PolynomialNonlinearity.from_pairs([(1, 1.0)])

    def test_zero_nonlinearity_rejected(self):
        with pytest.raises(ConfigError):
            PolynomialNonlinearity((0.0, 0.0))

    def test_eval_order_out_of_range(self, cubic):
        with pytest.raises(ConfigError):
            cubic.eval(1.0, order=3)


class TestExistence:
    @pytest.mark.parametrize("omega", [1.0, 4.0])
    def test_cubic_root_is_sqrt_omega(self, cubic, omega):
        check = check_existence(cubic, omega)
        assert check.satisfied
        assert check.y0 == pytest.approx(np.sqrt(omega), abs=1e-12)
        assert cubic.T(check.y0, omega) == pytest.approx(0.0, abs=1e-12)

    def test_cubic_quintic_root_below_cubic(self, cubic_quintic):
        check = check_existence(cubic_quintic, 1.0)
        assert check.satisfied
        assert 0.0 < check.y0 < 1.0

    def test_defocusing_has_no_root(self):
        with pytest.raises(NoRoot):
            check_existence(PolynomialNonlinearity((-1.0,)), 1.0)

    def test_nonpositive_omega(self, cubic):
        with pytest.raises(ConfigError):
            check_existence(cubic, 0.0)
