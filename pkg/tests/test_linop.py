"""Tests for the linearized operator: kernel, identities, inversion and coercivity."""

import numpy as np
import pytest

from app.core.errors import NotOrthogonal, SingularGram
from app.core.field import inner, physical_norm
from app.core.linop import (
    LinearizedOperator,
    ProjectionBasis,
    coercivity_floor,
    diagnostics,
    invert_projected,
    kernel_complement,
    project,
    rayleigh_quotient,
)


def localized(grid, rng, center=0.0):
    x = grid.x
    envelope = np.exp(-0.25 * (x - center) ** 2)
    coefficients = rng.normal(size=(3, 2))
    return grid.field(sum((a + 1j * b) * (x - center) ** j for j, (a, b) in enumerate(coefficients)) * envelope)


class TestKernelAndIdentities:
    def test_kernel(self, cubic_operator):
        S = cubic_operator
        dphi, iphi = S.kernel
        assert physical_norm(S.apply(dphi)) / physical_norm(dphi) <= 1e-6
        assert physical_norm(S.apply(iphi)) / physical_norm(iphi) <= 1e-6

    def test_diagnostics(self, cubic_operator):
        report = diagnostics(cubic_operator).to_dict()
        assert max(report["kernel_residuals"].values()) <= 1e-6
        assert max(report["identity_residuals"].values()) <= 1e-4
        assert report["coercivity_floor"] > 0.0
        assert report["unconstrained_floor"] < 0.0
        assert report["grid"]["n"] == 1024

    def test_symmetry(self, cubic_operator, rng):
        S = cubic_operator
        for _ in range(100):
            rho, sigma = localized(S.grid, rng), localized(S.grid, rng, center=1.0)
            gap = abs(inner(S.apply(rho), sigma) - inner(rho, S.apply(sigma)))
            assert gap <= 1e-10 * rho.h1() * sigma.h1()

    def test_real_and_imaginary_blocks_decouple(self, cubic_operator, rng):
        S = cubic_operator
        rho = localized(S.grid, rng)
        real_part = S.grid.field(rho.real)
        imag_part = S.grid.field(1j * rho.imag)
        assert np.max(np.abs(S.apply(real_part).imag)) == 0.0
        assert np.max(np.abs(S.apply(imag_part).real)) == 0.0


class TestInversion:
    def test_right_inverse(self, cubic_operator, rng):
        S = cubic_operator
        f = kernel_complement(S, localized(S.grid, rng))
        rho = invert_projected(S, f)
        assert physical_norm(S.apply(rho) - f) <= 1e-8 * physical_norm(f)

    def test_solution_orthogonal_to_kernel(self, cubic_operator, rng):
        S = cubic_operator
        rho = invert_projected(S, kernel_complement(S, localized(S.grid, rng, center=0.5)))
        for k in S.kernel:
            assert abs(inner(rho, k)) <= 1e-8 * physical_norm(rho) * physical_norm(k)

    def test_zero_right_hand_side(self, cubic_operator):
        assert physical_norm(invert_projected(cubic_operator, cubic_operator.grid.zeros())) == 0.0

    def test_not_orthogonal(self, cubic_operator):
        with pytest.raises(NotOrthogonal):
            invert_projected(cubic_operator, cubic_operator.kernel[0])

    def test_small_grid(self, cubic_profile, small_grid, rng):
        S = LinearizedOperator(cubic_profile, small_grid)
        f = kernel_complement(S, localized(small_grid, rng))
        rho = invert_projected(S, f)
        assert physical_norm(S.apply(rho) - f) <= 1e-8 * physical_norm(f)


class TestProjection:
    def test_complement_is_orthogonal(self, cubic_operator, rng):
        basis = ProjectionBasis.pi(cubic_operator)
        f = localized(cubic_operator.grid, rng)
        rest = basis.complement(f)
        for e in basis.vectors:
            assert abs(inner(rest, e)) <= 1e-10 * physical_norm(f) * physical_norm(e)
        np.testing.assert_allclose((project(basis, f) + rest).values, f.values, atol=1e-12)

    def test_pi1_basis(self, cubic_operator):
        basis = ProjectionBasis.for_operator(cubic_operator, "pi1")
        assert basis.names[0] == "i phi'"

    def test_singular_gram(self, cubic_operator):
        dphi = cubic_operator.kernel[0]
        with pytest.raises(SingularGram):
            ProjectionBasis([dphi, 2.0 * dphi], ["a", "b"])


class TestCoercivity:
    def test_rotated_constraints_positive(self, cubic_profile, small_grid):
        S = LinearizedOperator(cubic_profile, small_grid)
        assert coercivity_floor(S, constraint="rotated") > 0.0

    def test_unconstrained_negative(self, cubic_profile, small_grid):
        S = LinearizedOperator(cubic_profile, small_grid)
        assert coercivity_floor(S, constraint="none") < 0.0

    def test_kernel_rayleigh_quotient(self, cubic_operator):
        dphi, iphi = cubic_operator.kernel
        assert abs(rayleigh_quotient(cubic_operator, dphi)) <= 1e-6
        assert abs(rayleigh_quotient(cubic_operator, iphi)) <= 1e-6

    def test_ground_state_direction_negative(self, cubic_operator):
        phi = cubic_operator.field(cubic_operator.phi)
        assert rayleigh_quotient(cubic_operator, phi) < 0.0
