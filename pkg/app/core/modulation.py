"""Modulation fit, remainder and Lyapunov diagnostics for odd two-soliton fields."""

import logging
from dataclasses import dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from app.config.settings import settings
from app.core.ansatz import ApproximateSolution, InteractionDynamics, smoothstep
from app.core.errors import ConfigError, InsufficientSamples, NoConvergence, SingularJacobian
from app.core.field import ComplexField, SolitonParams, SpectralGrid, inner
from app.core.linop import ProjectionBasis
from app.core.nonlinearity import PolynomialNonlinearity
from app.core.profile import SolitonProfile

logger = logging.getLogger(__name__)

SHIFT_NAMES = ("zeta", "v", "gamma", "omega")
TEST_NAMES = ("gamma", "zeta", "omega", "v")


@dataclass(frozen=True)
class ModulationState:
    """Reference parameters sigma_k(t) plus fitted shifts (p_zeta, p_v, p_gamma, p_omega)."""

    base: SolitonParams
    shifts: Tuple[float, float, float, float]
    residual_norm: float
    remainder_h1: float = float("nan")
    iterations: int = 0
    t: float = float("nan")

    @property
    def params(self) -> SolitonParams:
        """The fitted parameters sigma_u."""
        p_zeta, p_v, p_gamma, p_omega = self.shifts
        b = self.base
        return SolitonParams(
            zeta=b.zeta + p_zeta, v=b.v + p_v, gamma=b.gamma + p_gamma, omega=b.omega, f_omega=b.f_omega + p_omega
        )

    def as_row(self) -> Dict[str, float]:
        p_zeta, p_v, p_gamma, p_omega = self.shifts
        return {
            "t": self.t,
            "p_zeta": p_zeta,
            "p_v": p_v,
            "p_gamma": p_gamma,
            "p_omega": p_omega,
            "residual": self.residual_norm,
        }


class ModulationModel:
    """
    P(sigma) = Sym(e^{i alpha} G(x - zeta)) with G = phi + f_omega d_omega phi (+ c_j p_j at order 1).

    The order-1 model borrows the correction profiles and their coefficients
    at time t from an ApproximateSolution.
    """

    def __init__(
        self,
        profile: SolitonProfile,
        grid: SpectralGrid,
        ansatz: Optional[ApproximateSolution] = None,
        t: float = 0.0,
    ):
        self.profile = profile
        self.grid = grid
        self.ansatz = ansatz
        self.coefficients: Optional[List[Tuple[float, float]]] = None
        if ansatz is not None:
            if ansatz.grid != grid:
                raise ConfigError("Ansatz and field grids differ")
            self.coefficients = [(c, 0.0) for c, _ in ansatz.schedule(t).coefficients]

    @classmethod
    def for_order(
        cls,
        profile: SolitonProfile,
        grid: SpectralGrid,
        order: int = 0,
        ansatz: Optional[ApproximateSolution] = None,
        t: float = 0.0,
    ) -> "ModulationModel":
        if order == 0:
            return cls(profile, grid)
        if order == 1:
            if ansatz is None or ansatz.order != 1:
                raise ConfigError("An order-1 fit needs the order-1 ansatz it is measured against")
            return cls(profile, grid, ansatz, t)
        raise ConfigError(f"Fit order must be 0 or 1, got {order}")

    def _profile(self, params: SolitonParams) -> Tuple[np.ndarray, np.ndarray, np.ndarray]:
        y = self.grid.x - params.zeta
        if self.coefficients is None:
            G = self.profile.sample(y).astype(complex)
            G_prime = self.profile.sample_derivative(y).astype(complex)
        else:
            terms = self.ansatz.terms_at(params.zeta, self.coefficients)
            G = sum(term.coefficient * term.values for term in terms)
            G_prime = sum(term.coefficient * term.derivative for term in terms)
        d_omega = self.profile.sample_d_omega(y)
        if params.f_omega:
            G = G + params.f_omega * d_omega
            G_prime = G_prime + params.f_omega * self.profile.d_omega.derivative(y)
        return G, G_prime, d_omega

    def _sym(self, values: np.ndarray) -> ComplexField:
        f = self.grid.field(values)
        return f - f.mirror()

    def field(self, params: SolitonParams) -> ComplexField:
        G, _, _ = self._profile(params)
        return self._sym(np.exp(1j * params.phase(self.grid.x)) * G)

    def derivatives(self, params: SolitonParams) -> List[ComplexField]:
        """dP/dp_zeta, dP/dp_v, dP/dp_gamma, dP/dp_omega."""
        x = self.grid.x
        y = x - params.zeta
        phase = np.exp(1j * params.phase(x))
        G, G_prime, d_omega = self._profile(params)
        W = phase * G
        return [
            self._sym(-phase * G_prime - 0.25j * params.v * W),
            self._sym(1j * (0.5 * y + 0.25 * params.zeta) * W),
            self._sym(1j * W),
            self._sym(phase * d_omega),
        ]

    def test_fields(self, params: SolitonParams) -> List[ComplexField]:
        """Right-soliton test fields, ordered (gamma, zeta, omega, v)."""
        x = self.grid.x
        y = x - params.zeta
        phase = np.exp(1j * params.phase(x))
        phi = self.profile.sample(y)
        return [
            self.grid.field(phase * phi),
            self.grid.field(1j * phase * self.profile.sample_derivative(y)),
            self.grid.field(1j * phase * self.profile.sample_d_omega(y)),
            self.grid.field(phase * y * phi),
        ]


def _shifted(base: SolitonParams, shifts: np.ndarray) -> SolitonParams:
    p_zeta, p_v, p_gamma, p_omega = (float(s) for s in shifts)
    return SolitonParams(
        zeta=base.zeta + p_zeta,
        v=base.v + p_v,
        gamma=base.gamma + p_gamma,
        omega=base.omega,
        f_omega=base.f_omega + p_omega,
    )


def estimate_phase(u: ComplexField, model: ModulationModel, params: SolitonParams) -> float:
    """Phase offset of u against the model on x > 0."""
    P = model.field(params)
    right = u.grid.x > 0.0
    overlap = np.sum(u.values[right] * np.conj(P.values[right]))
    return float(np.angle(overlap)) if abs(overlap) > 0.0 else 0.0


def fit(
    u: ComplexField,
    guess: SolitonParams,
    profile: SolitonProfile,
    order: int = 0,
    ansatz: Optional[ApproximateSolution] = None,
    t: float = float("nan"),
    initial_shifts: Optional[Sequence[float]] = None,
    align_phase: bool = True,
    model: Optional[ModulationModel] = None,
) -> ModulationState:
    """
    Newton solve of <u - P(sigma + p), T_j> = 0 for the right-soliton test fields.

    Args:
        u: Odd field to fit
        guess: Reference parameters sigma_k(t); shifts are reported against it
        profile: Soliton profile
        order: 0 for the bare soliton model, 1 to include the ansatz corrections
        ansatz: The order-1 ansatz (order 1 only)
        t: Time stamp, also selects the order-1 coefficients
        initial_shifts: Warm start
        align_phase: Pre-align p_gamma on the right half-line
        model: Prebuilt model, overrides order/ansatz

    Returns:
        ModulationState with the converged shifts

    Raises:
        NoConvergence: start outside the basin or Newton did not converge
        SingularJacobian: the 4x4 Jacobian is singular
    """
    if model is None:
        model = ModulationModel.for_order(profile, u.grid, order, ansatz, 0.0 if np.isnan(t) else t)
    shifts = np.zeros(4) if initial_shifts is None else np.array(initial_shifts, dtype=float)
    if align_phase:
        shifts[2] += estimate_phase(u, model, _shifted(guess, shifts))

    scale = max(u.h1(), 1.0)
    start_distance = (u - model.field(_shifted(guess, shifts))).h1()
    if start_distance > settings.FIT_BASIN * scale:
        raise NoConvergence(
            f"Start is outside the fit basin: |u - P| = {start_distance:.3e}",
            detail={"distance": start_distance, "basin": settings.FIT_BASIN},
        )

    target = settings.FIT_TOL * scale
    residual = np.inf
    for iteration in range(1, settings.FIT_MAX_ITER + 1):
        params = _shifted(guess, shifts)
        tests = model.test_fields(params)
        difference = u - model.field(params)
        R = np.array([inner(difference, T) for T in tests])
        residual = float(np.max(np.abs(R)))
        logger.debug(f"Fit iteration {iteration}: max |<u - P, T>| = {residual:.3e}")
        if residual <= target:
            state = ModulationState(
                base=guess, shifts=tuple(float(s) for s in shifts), residual_norm=residual, iterations=iteration, t=t
            )
            r = remainder(u, state, profile, model=model)
            return replace(state, remainder_h1=r.h1())
        J = -np.array([[inner(dP, T) for dP in model.derivatives(params)] for T in tests])
        if not np.all(np.isfinite(J)) or np.linalg.cond(J) > 1e12:
            raise SingularJacobian(f"Fit Jacobian is singular at iteration {iteration}", detail={"jacobian": J.tolist()})
        shifts = shifts - np.linalg.solve(J, R)
        if not np.all(np.isfinite(shifts)):
            break
    raise NoConvergence(
        f"Modulation fit did not converge in {settings.FIT_MAX_ITER} iterations (residual {residual:.3e})",
        detail={"residual": residual, "shifts": [float(s) for s in shifts]},
    )


def remainder(
    u: ComplexField,
    state: ModulationState,
    profile: SolitonProfile,
    order: int = 0,
    ansatz: Optional[ApproximateSolution] = None,
    model: Optional[ModulationModel] = None,
) -> ComplexField:
    """r = e^{-i gamma}(u - P(sigma_u))."""
    if model is None:
        model = ModulationModel.for_order(profile, u.grid, order, ansatz, 0.0 if np.isnan(state.t) else state.t)
    params = state.params
    return (u - model.field(params)) * np.exp(-1j * params.gamma)


# Lyapunov functional


def cutoff(s):
    """1 for s <= 1/2, 0 for s >= 6/10, quintic smoothstep in between."""
    return 1.0 - smoothstep((np.asarray(s, dtype=float) - 0.5) / 0.1)


@dataclass(frozen=True)
class RemainderDiagnostics:
    L: float
    P1: float
    P2: float
    E: float
    r_H1: float
    chi_params: Dict[str, float] = field(default_factory=dict)

    def as_row(self) -> Dict[str, float]:
        return {"L": self.L, "P1": self.P1, "P2": self.P2, "E": self.E, "r_H1": self.r_H1}


def quadratic_form(r: ComplexField, params: SolitonParams, profile: SolitonProfile, F: PolynomialNonlinearity) -> float:
    """The six-term quadratic energy L(t, r) with both solitons' potentials."""
    x = r.grid.x
    dx = r.grid.dx
    h = r.values * np.exp(1j * params.gamma)
    rx = r.derivative(1).values
    phi_right = profile.sample(x - params.zeta) ** 2
    phi_left = profile.sample(x + params.zeta) ** 2
    alpha_right = params.phase(x)
    alpha_left = params.phase(-x)

    kinetic = np.sum(np.abs(rx) ** 2 + params.omega * np.abs(r.values) ** 2)
    potential = np.sum((F.dF(phi_right) + F.dF(phi_left)) * np.abs(r.values) ** 2)
    coupling = np.real(
        np.sum(F.d2F(phi_right) * phi_right * np.exp(2j * alpha_right) * np.conj(h) ** 2)
        + np.sum(F.d2F(phi_left) * phi_left * np.exp(2j * alpha_left) * np.conj(h) ** 2)
    )
    modulus = np.sum((F.d2F(phi_right) * phi_right + F.d2F(phi_left) * phi_left) * np.abs(r.values) ** 2)
    return float((kinetic - potential - coupling - modulus) * dx)


def localized_momenta(r: ComplexField, zeta: float) -> Tuple[float, float]:
    """P_j = Im int chi_j conj(r) r_x with chi_1 = chi((x + zeta)/(2 zeta)), chi_2 = 1 - chi_1."""
    if not zeta > 0:
        raise ConfigError(f"Localized momenta need zeta > 0, got {zeta}")
    chi1 = cutoff((r.grid.x + zeta) / (2.0 * zeta))
    density = np.imag(np.conj(r.values) * r.derivative(1).values)
    dx = r.grid.dx
    return float(np.sum(chi1 * density) * dx), float(np.sum((1.0 - chi1) * density) * dx)


def lyapunov(
    r: ComplexField,
    state: ModulationState,
    profile: SolitonProfile,
    F: Optional[PolynomialNonlinearity] = None,
    d_dot: float = 0.0,
) -> RemainderDiagnostics:
    """L, P1, P2 and E = L - d' P2 + d' P1 for a fitted remainder."""
    F = F or profile.nonlinearity
    params = state.params
    L = quadratic_form(r, params, profile, F)
    P1, P2 = localized_momenta(r, params.zeta)
    return RemainderDiagnostics(
        L=L,
        P1=P1,
        P2=P2,
        E=L - d_dot * P2 + d_dot * P1,
        r_H1=r.h1(),
        chi_params={"plateau": 0.5, "cutoff": 0.6, "zeta": params.zeta},
    )


def constraint_basis(state: ModulationState, profile: SolitonProfile, grid: SpectralGrid) -> ProjectionBasis:
    """The four test fields at +zeta and their mirrors at -zeta."""
    model = ModulationModel(profile, grid)
    tests = model.test_fields(state.params)
    vectors = tests + [T.mirror() for T in tests]
    names = [f"{name}+" for name in TEST_NAMES] + [f"{name}-" for name in TEST_NAMES]
    return ProjectionBasis(vectors, names)


def project_remainder(r: ComplexField, state: ModulationState, profile: SolitonProfile) -> ComplexField:
    """Remove from r every component the orthogonality conditions forbid."""
    basis = constraint_basis(state, profile, r.grid)
    rotation = np.exp(1j * state.params.gamma)
    return basis.complement(r * rotation) * np.conj(rotation)


# Rate check


@dataclass(frozen=True)
class RateReport:
    t: List[float]
    residuals: Dict[str, List[float]]
    surrogate: List[float]
    C1: float
    C2: float
    C3: float
    ratios: Dict[str, float]
    violated: Dict[str, bool]

    def to_dict(self) -> dict:
        return {
            "C1": self.C1,
            "C2": self.C2,
            "C3": self.C3,
            "max_ratio": self.ratios,
            "violated": self.violated,
        }

    def rows(self) -> List[Dict[str, float]]:
        rows = []
        for i, t in enumerate(self.t):
            row = {"t": t, "surrogate": self.surrogate[i]}
            row.update({f"R_{key}": values[i] for key, values in self.residuals.items()})
            rows.append(row)
        return rows


def _least_squares(columns: List[np.ndarray], target: np.ndarray) -> np.ndarray:
    A = np.column_stack(columns)
    if not np.any(A):
        return np.full(len(columns), np.nan)
    solution, *_ = np.linalg.lstsq(A, target, rcond=None)
    return solution


def rate_check(
    states: Sequence[ModulationState],
    dyn: InteractionDynamics,
    tolerance: Optional[float] = None,
) -> RateReport:
    """
    Residuals of the modulation equations along a fitted trajectory.

        p_v' + C1 p_zeta E,  p_zeta' - p_v,  p_gamma' + p_omega - (C2 + C3 d) p_zeta E,  p_omega'

    with E = e^{-2 sqrt(omega) d(t)} and C1, C2, C3 fitted by least squares.
    Each residual is compared with tolerance * (||r||^2 + v^2 ||r|| ln(1/v)).

    Raises:
        InsufficientSamples: fewer than 10 states
    """
    tolerance = settings.RATE_TOLERANCE if tolerance is None else tolerance
    if len(states) < 10:
        raise InsufficientSamples(f"rate_check needs at least 10 fitted states, got {len(states)}")
    t = np.array([s.t for s in states])
    steps = np.diff(t)
    if not np.all(np.isfinite(t)) or np.any(steps <= 0) or np.ptp(steps) > 1e-8 * max(abs(steps[0]), 1.0):
        raise ConfigError("rate_check needs increasing, uniformly spaced times")

    shifts = np.array([s.shifts for s in states])
    p_zeta, p_v, p_gamma, p_omega = shifts.T
    p_gamma = np.unwrap(p_gamma)
    rates = [np.gradient(p, t) for p in (p_zeta, p_v, p_gamma, p_omega)]
    d = dyn.separation(t)[0]
    coupling = p_zeta * dyn.interaction(t)

    (C1,) = _least_squares([coupling], -rates[1])
    C2, C3 = _least_squares([coupling, d * coupling], rates[2] + p_omega)
    c1, c2, c3 = (0.0 if np.isnan(c) else c for c in (C1, C2, C3))
    residuals = {
        "v": rates[1] + c1 * coupling,
        "zeta": rates[0] - p_v,
        "gamma": rates[2] + p_omega - c2 * coupling - c3 * d * coupling,
        "omega": rates[3],
    }

    r = np.array([s.remainder_h1 for s in states])
    r = np.where(np.isfinite(r), r, 0.0)
    v = dyn.v
    surrogate = r**2 + v**2 * r * np.log(1.0 / v)
    bound = tolerance * surrogate + 1e-8
    ratios = {key: float(np.max(np.abs(value) / bound)) for key, value in residuals.items()}
    violated = {key: ratio > 1.0 for key, ratio in ratios.items()}
    if any(violated.values()):
        logger.warning(f"Modulation rate check exceeded the surrogate bound: {ratios}")
    logger.info(f"Rate check: C1={C1:.4g}, C2={C2:.4g}, C3={C3:.4g}")
    return RateReport(
        t=t.tolist(),
        residuals={key: value.tolist() for key, value in residuals.items()},
        surrogate=surrogate.tolist(),
        C1=float(C1),
        C2=float(C2),
        C3=float(C3),
        ratios=ratios,
        violated=violated,
    )
