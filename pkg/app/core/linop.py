"""The linearized operator S_omega around phi_omega.

S(rho) = -rho'' + omega rho - F'(phi^2) rho - F''(phi^2) phi^2 (rho + conj rho)

S is real-linear. On rho = a + ib it acts as L+ a + i L- b with
    L+ = -d^2 + omega - F'(phi^2) - 2 F''(phi^2) phi^2
    L- = -d^2 + omega - F'(phi^2)
so every computation below works on the two real blocks separately.
"""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Dict, List, Literal, Optional, Sequence, Tuple

import numpy as np
from scipy.linalg import circulant, eigh, null_space, solve
from scipy.sparse.linalg import LinearOperator, cg, lobpcg, minres

from app.config.settings import settings
from app.core.errors import ConfigError, GridMismatch, NoConvergence, NotOrthogonal, SingularGram
from app.core.field import ComplexField, SpectralGrid, inner, physical_norm
from app.core.profile import SolitonProfile

logger = logging.getLogger(__name__)

Constraint = Literal["orthogonal", "rotated", "none"]
Block = Literal["real", "imag"]


class LinearizedOperator:
    """S_omega sampled on a spectral grid, with phi centred at x = 0."""

    def __init__(self, profile: SolitonProfile, grid: SpectralGrid):
        self.profile = profile
        self.grid = grid
        self.omega = profile.omega
        x = grid.x
        F = profile.nonlinearity
        self.phi = profile.sample(x)
        self.dphi = profile.sample_derivative(x)
        self.d_omega_phi = profile.sample_d_omega(x)
        phi2 = self.phi**2
        self.potential_minus = self.omega - F.dF(phi2)
        self.potential_plus = self.potential_minus - 2.0 * F.d2F(phi2) * phi2
        edge = max(abs(self.phi[0]), abs(self.phi[-1]))
        if edge > settings.WRAP_TOLERANCE * profile.y0:
            logger.warning(f"Profile at the grid edge is {edge:.2e}; grid is short for omega={self.omega:g}")

    # Real blocks

    def _minus_laplacian(self, a: np.ndarray) -> np.ndarray:
        return np.fft.ifft(self.grid.k**2 * np.fft.fft(a)).real

    def l_plus(self, a: np.ndarray) -> np.ndarray:
        return self._minus_laplacian(a) + self.potential_plus * a

    def l_minus(self, b: np.ndarray) -> np.ndarray:
        return self._minus_laplacian(b) + self.potential_minus * b

    def block(self, which: Block):
        return self.l_plus if which == "real" else self.l_minus

    def potential(self, which: Block) -> np.ndarray:
        return self.potential_plus if which == "real" else self.potential_minus

    def kernel_vector(self, which: Block) -> np.ndarray:
        """phi' spans ker L+, phi spans ker L-."""
        return self.dphi if which == "real" else self.phi

    def apply(self, rho: ComplexField) -> ComplexField:
        if rho.grid != self.grid:
            raise GridMismatch("Field and operator live on different grids")
        values = self.l_plus(rho.values.real) + 1j * self.l_minus(rho.values.imag)
        return ComplexField(self.grid, values)

    def __call__(self, rho: ComplexField) -> ComplexField:
        return self.apply(rho)

    # Named fields

    def field(self, values) -> ComplexField:
        return self.grid.field(values)

    @cached_property
    def kernel(self) -> Tuple[ComplexField, ComplexField]:
        return self.field(self.dphi), self.field(1j * self.phi)

    # Dense forms

    @cached_property
    def second_derivative_matrix(self) -> np.ndarray:
        return circulant(np.fft.ifft(-self.grid.k**2).real)

    def dense_block(self, which: Block) -> np.ndarray:
        matrix = -self.second_derivative_matrix.copy()
        matrix[np.diag_indices_from(matrix)] += self.potential(which)
        return matrix

    def h1_gram_block(self) -> np.ndarray:
        matrix = -self.second_derivative_matrix.copy()
        matrix[np.diag_indices_from(matrix)] += 1.0
        return matrix


def apply(S: LinearizedOperator, rho: ComplexField) -> ComplexField:
    return S.apply(rho)


@dataclass
class ProjectionBasis:
    """Four fields spanning the projected directions, with their Gram matrix."""

    vectors: List[ComplexField]
    names: List[str]
    gram: np.ndarray = field(init=False)

    def __post_init__(self):
        m = len(self.vectors)
        self.gram = np.array([[inner(self.vectors[i], self.vectors[j]) for j in range(m)] for i in range(m)])
        condition = np.linalg.cond(self.gram)
        if not np.isfinite(condition) or condition > settings.GRAM_CONDITION_MAX:
            raise SingularGram(
                f"Gram matrix of {self.names} has condition number {condition:.3e}",
                detail={"condition": float(condition), "names": self.names},
            )

    @classmethod
    def pi(cls, S: LinearizedOperator) -> "ProjectionBasis":
        """span{phi', i phi, d_omega phi, i x phi}."""
        x = S.grid.x
        return cls(
            [S.field(S.dphi), S.field(1j * S.phi), S.field(S.d_omega_phi), S.field(1j * x * S.phi)],
            ["phi'", "i phi", "d_omega phi", "i x phi"],
        )

    @classmethod
    def pi1(cls, S: LinearizedOperator) -> "ProjectionBasis":
        """span{i phi', i phi, i x phi, i d_omega phi}."""
        x = S.grid.x
        return cls(
            [S.field(1j * S.dphi), S.field(1j * S.phi), S.field(1j * x * S.phi), S.field(1j * S.d_omega_phi)],
            ["i phi'", "i phi", "i x phi", "i d_omega phi"],
        )

    @classmethod
    def for_operator(cls, S: LinearizedOperator, which: str = "pi") -> "ProjectionBasis":
        if which == "pi":
            return cls.pi(S)
        if which == "pi1":
            return cls.pi1(S)
        raise ConfigError(f"Unknown projection '{which}' (expected 'pi' or 'pi1')")

    def coefficients(self, f: ComplexField) -> np.ndarray:
        rhs = np.array([inner(f, e) for e in self.vectors])
        return np.linalg.solve(self.gram, rhs)

    def project(self, f: ComplexField) -> ComplexField:
        coefficients = self.coefficients(f)
        out = f.grid.zeros()
        for c, e in zip(coefficients, self.vectors):
            out = out + c * e
        return out

    def complement(self, f: ComplexField) -> ComplexField:
        return f - self.project(f)


def project(basis: ProjectionBasis, f: ComplexField) -> ComplexField:
    """Component of f in span(basis); f - project(f) is orthogonal to every basis vector."""
    return basis.project(f)


def kernel_complement(S: LinearizedOperator, f: ComplexField) -> ComplexField:
    """f with its phi' and i phi components removed."""
    out = f.values.copy()
    for which in ("real", "imag"):
        k = S.kernel_vector(which)
        part = out.real if which == "real" else out.imag
        coefficient = np.dot(part, k) / np.dot(k, k)
        out = out - (coefficient * k if which == "real" else 1j * coefficient * k)
    return ComplexField(f.grid, out)


# Inversion


def _projector(k: np.ndarray):
    unit = k / np.linalg.norm(k)

    def project_out(a):
        return a - np.dot(unit, a) * unit

    return project_out


def _iterative_block(S: LinearizedOperator, which: Block, rhs: np.ndarray) -> Tuple[np.ndarray, int]:
    n = S.grid.n
    P = _projector(S.kernel_vector(which))
    block = S.block(which)
    smoother = 1.0 / (S.grid.k**2 + S.omega)

    A = LinearOperator((n, n), matvec=lambda a: P(block(P(np.ravel(a)))), dtype=float)
    M = LinearOperator((n, n), matvec=lambda r: P(np.fft.ifft(smoother * np.fft.fft(P(np.ravel(r)))).real), dtype=float)

    # L- is positive semidefinite with kernel phi; L+ has one negative direction.
    if which == "imag":
        solution, info = cg(A, rhs, rtol=settings.SOLVER_RTOL, maxiter=settings.SOLVER_MAX_ITER, M=M)
    else:
        solution, info = minres(A, rhs, rtol=settings.SOLVER_RTOL, maxiter=settings.SOLVER_MAX_ITER, M=M)
    return P(solution), info


def _dense_block(S: LinearizedOperator, which: Block, rhs: np.ndarray) -> np.ndarray:
    k = S.kernel_vector(which)
    n = S.grid.n
    bordered = np.zeros((n + 1, n + 1))
    bordered[:n, :n] = S.dense_block(which)
    bordered[:n, n] = k
    bordered[n, :n] = k
    solution = solve(bordered, np.append(rhs, 0.0))
    return solution[:n]


def invert_projected(S: LinearizedOperator, f: ComplexField) -> ComplexField:
    """
    Solve S(rho) = f for rho orthogonal to phi' and i phi.

    Args:
        S: The linearized operator
        f: Right-hand side, orthogonal to the kernel within ORTHOGONALITY_TOL

    Returns:
        The unique solution in the complement of the kernel
    """
    if f.grid != S.grid:
        raise GridMismatch("Field and operator live on different grids")
    size = physical_norm(f)
    if size == 0.0:
        return f.grid.zeros()

    for name, k in zip(("phi'", "i phi"), S.kernel):
        overlap = abs(inner(f, k)) / (size * physical_norm(k))
        if overlap > settings.ORTHOGONALITY_TOL:
            raise NotOrthogonal(
                f"Right-hand side has relative overlap {overlap:.3e} with {name}",
                detail={"direction": name, "overlap": overlap},
            )

    # the admissible part of f; its kernel overlap is below ORTHOGONALITY_TOL
    target = kernel_complement(S, f)
    parts = {}
    for which, rhs in (("real", target.values.real), ("imag", target.values.imag)):
        if not np.any(rhs):
            parts[which] = np.zeros_like(rhs)
            continue
        solution, info = _iterative_block(S, which, rhs)
        residual = np.linalg.norm(S.block(which)(solution) - rhs) / np.linalg.norm(rhs)
        logger.debug(f"Block {which}: info={info}, relative residual {residual:.3e}")
        if residual > settings.INVERSION_RTOL:
            if S.grid.n > settings.DENSE_FALLBACK_MAX_N:
                raise NoConvergence(
                    f"Iterative solve of the {which} block stalled at residual {residual:.3e}",
                    detail={"block": which, "residual": float(residual), "info": int(info)},
                )
            logger.warning(f"Iterative {which} block residual {residual:.3e}; using dense bordered solve")
            solution = _dense_block(S, which, rhs)
        parts[which] = solution

    rho = ComplexField(S.grid, parts["real"] + 1j * parts["imag"])
    residual = physical_norm(S.apply(rho) - target) / size
    if residual > settings.INVERSION_RTOL:
        raise NoConvergence(
            f"Projected inversion residual {residual:.3e} exceeds {settings.INVERSION_RTOL:g}",
            detail={"residual": residual},
        )
    return rho


# Coercivity


def constraint_fields(S: LinearizedOperator, constraint: Constraint) -> List[ComplexField]:
    x = S.grid.x
    if constraint == "orthogonal":
        return [S.field(S.dphi), S.field(1j * S.phi), S.field(S.d_omega_phi)]
    if constraint == "rotated":
        return [S.field(x * S.phi), S.field(1j * S.d_omega_phi), S.field(S.phi)]
    if constraint == "none":
        return []
    raise ConfigError(f"Unknown constraint set '{constraint}'")


def _split_constraints(constraints: Sequence[ComplexField]) -> Dict[str, List[np.ndarray]]:
    blocks: Dict[str, List[np.ndarray]] = {"real": [], "imag": []}
    for c in constraints:
        if not np.any(c.values.imag):
            blocks["real"].append(c.values.real)
        elif not np.any(c.values.real):
            blocks["imag"].append(c.values.imag)
        else:
            raise ConfigError("Constraint fields must be purely real or purely imaginary")
    return blocks


def _dense_floor(S: LinearizedOperator, which: Block, constraints: List[np.ndarray]) -> float:
    A = S.dense_block(which)
    B = S.h1_gram_block()
    if constraints:
        Z = null_space(np.column_stack(constraints).T)
        A, B = Z.T @ A @ Z, Z.T @ B @ Z
    A = 0.5 * (A + A.T)
    B = 0.5 * (B + B.T)
    return float(eigh(A, B, eigvals_only=True, subset_by_index=[0, 0])[0])


def _iterative_floor(S: LinearizedOperator, which: Block, constraints: List[np.ndarray], seed: int) -> float:
    n = S.grid.n
    k2 = S.grid.k**2
    block = S.block(which)

    def h1(a):
        return np.fft.ifft((1.0 + k2) * np.fft.fft(a, axis=0), axis=0).real

    def h1_inverse(a):
        return np.fft.ifft(np.fft.fft(a, axis=0) / (1.0 + k2)[:, None], axis=0).real

    A = LinearOperator((n, n), matvec=lambda a: block(np.ravel(a)), dtype=float)
    B = LinearOperator((n, n), matvec=lambda a: h1(np.ravel(a)), dtype=float)
    M = LinearOperator(
        (n, n),
        matvec=lambda r: np.fft.ifft(np.fft.fft(np.ravel(r)) / (k2 + S.omega)).real,
        dtype=float,
    )
    # B-orthogonality to B^{-1} c is L2-orthogonality to c
    Y = h1_inverse(np.column_stack(constraints)) if constraints else None

    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 3))
    values, vectors = lobpcg(
        A, X, B=B, M=M, Y=Y, tol=settings.EIGEN_TOL, maxiter=settings.EIGEN_MAX_ITER, largest=False
    )
    order = np.argsort(values)
    value, vector = float(values[order[0]]), vectors[:, order[0]]
    residual = np.linalg.norm(block(vector) - value * h1(vector)) / max(np.linalg.norm(block(vector)), 1e-300)
    if residual > np.sqrt(settings.EIGEN_TOL):
        raise NoConvergence(
            f"LOBPCG for the {which} block stopped at residual {residual:.3e}",
            detail={"block": which, "residual": float(residual), "value": value},
        )
    return value


def coercivity_floor(
    S: LinearizedOperator,
    basis: Optional[ProjectionBasis] = None,
    constraint: Constraint = "orthogonal",
    seed: Optional[int] = None,
) -> float:
    """
    Smallest <S g, g> / ||g||_{H^1}^2 over g orthogonal to the constraint fields.

    Args:
        S: The linearized operator
        basis: Explicit constraint fields; overrides `constraint` when given
        constraint: "orthogonal" {phi', i phi, d_omega phi}, "rotated" {x phi, i d_omega phi, phi} or "none"
        seed: Seed for the LOBPCG start block

    Returns:
        The floor c (negative when a negative direction survives the constraints)
    """
    fields = basis.vectors if basis is not None else constraint_fields(S, constraint)
    blocks = _split_constraints(fields)
    seed = settings.SEED if seed is None else seed
    floors = {}
    for which in ("real", "imag"):
        if S.grid.n <= settings.DENSE_EIGEN_MAX_N:
            floors[which] = _dense_floor(S, which, blocks[which])
        else:
            floors[which] = _iterative_floor(S, which, blocks[which], seed)
    logger.info(
        f"Coercivity floor ({constraint if basis is None else basis.names}): "
        f"real block {floors['real']:.6g}, imaginary block {floors['imag']:.6g}"
    )
    return min(floors.values())


def rayleigh_quotient(S: LinearizedOperator, g: ComplexField) -> float:
    """<S g, g> / ||g||_{H^1}^2."""
    return inner(S.apply(g), g) / g.h1() ** 2


@dataclass(frozen=True)
class OperatorDiagnostics:
    kernel_residuals: Dict[str, float]
    identity_residuals: Dict[str, float]
    coercivity_floor: float
    coercivity_floor_orthogonal: float
    unconstrained_floor: float
    grid: Dict[str, float]

    def to_dict(self) -> dict:
        return {
            "kernel_residuals": self.kernel_residuals,
            "identity_residuals": self.identity_residuals,
            "coercivity_floor": self.coercivity_floor,
            "coercivity_floor_orthogonal": self.coercivity_floor_orthogonal,
            "unconstrained_floor": self.unconstrained_floor,
            "grid": self.grid,
        }


def diagnostics(S: LinearizedOperator) -> OperatorDiagnostics:
    """Kernel and identity residuals plus coercivity floors for the linop-check report."""
    x = S.grid.x
    phi = S.field(S.phi)
    dphi = S.field(S.dphi)
    kernel_residuals = {
        "phi_prime": physical_norm(S.apply(dphi)) / physical_norm(dphi),
        "i_phi": physical_norm(S.apply(1j * phi)) / physical_norm(phi),
    }
    identity_residuals = {
        "d_omega_phi": physical_norm(S.apply(S.field(S.d_omega_phi)) + phi) / physical_norm(phi),
        "i_x_phi_half": physical_norm(S.apply(S.field(0.5j * x * S.phi)) + 1j * dphi) / physical_norm(dphi),
    }
    return OperatorDiagnostics(
        kernel_residuals=kernel_residuals,
        identity_residuals=identity_residuals,
        coercivity_floor=coercivity_floor(S, constraint="rotated"),
        coercivity_floor_orthogonal=coercivity_floor(S, constraint="orthogonal"),
        unconstrained_floor=coercivity_floor(S, constraint="none"),
        grid=S.grid.metadata(),
    )
