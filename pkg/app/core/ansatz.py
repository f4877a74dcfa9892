"""Approximate two-soliton solutions and their residuals.

An ansatz is u = W(x) - W(-x) with W = e^{i alpha} G(x - zeta),
alpha = (v/2)(x - zeta/2) + gamma, and G a sum of time-dependent multiples
of fixed profiles (phi, the corrections p1, p2, p3, d_omega phi, ...).
Time derivatives are taken analytically from the parameter rates.
"""

import logging
from dataclasses import dataclass
from typing import Dict, List, Literal, Optional, Sequence, Tuple, Union

import numpy as np
from scipy.integrate import solve_ivp, trapezoid
from scipy.stats import linregress

from app.config.settings import settings
from app.core.errors import (
    ConfigError,
    CrossCheckFailed,
    InsufficientSamples,
    NoImprovement,
    NumericalError,
    SingularGram,
    WrapAround,
)
from app.core.field import ComplexField, SolitonParams, SpectralGrid, inner
from app.core.linop import LinearizedOperator, ProjectionBasis, invert_projected, kernel_complement
from app.core.nonlinearity import PolynomialNonlinearity
from app.core.profile import SolitonProfile

logger = logging.getLogger(__name__)

Variant = Literal["displayed", "balanced"]
Order = Union[int, Literal["refined"]]


# Interaction dynamics


@dataclass(frozen=True)
class InteractionDynamics:
    """d'' = C e^{-2 sqrt(omega) d}, d even, d'(t) -> v."""

    C: float
    omega: float
    v: float

    def __post_init__(self):
        if not self.C > 0:
            raise ConfigError(f"Interaction constant must be positive, got {self.C}")
        if not self.omega > 0:
            raise ConfigError(f"omega must be positive, got {self.omega}")
        if not self.v > 0:
            raise ConfigError(f"v must be positive, got {self.v}")

    @property
    def kappa(self) -> float:
        return float(np.sqrt(self.omega))

    def _s(self, t):
        return self.kappa * self.v * np.asarray(t, dtype=float)

    def separation(self, t):
        """(d, d_dot, d_ddot) from the closed form."""
        s = self._s(t)
        a = np.abs(s)
        log_cosh = a + np.log1p(np.exp(-2.0 * a)) - np.log(2.0)
        offset = 0.5 * np.log(self.C) - 0.25 * np.log(self.omega) - np.log(self.v)
        d = (offset + log_cosh) / self.kappa
        e = np.exp(-2.0 * a)
        sech2 = 4.0 * e / (1.0 + e) ** 2
        return d, self.v * np.tanh(s), self.kappa * self.v**2 * sech2

    def d_triple_dot(self, t):
        s = self._s(t)
        e = np.exp(-2.0 * np.abs(s))
        sech2 = 4.0 * e / (1.0 + e) ** 2
        return -2.0 * self.omega * self.v**3 * sech2 * np.tanh(s)

    @property
    def d0(self) -> float:
        return float(self.separation(0.0)[0])

    def interaction(self, t):
        """e^{-2 sqrt(omega) d(t)} = sqrt(omega) v^2 sech^2(sqrt(omega) v t) / C."""
        return self.separation(t)[2] / self.C

    def ode_residual(self, t):
        d, _, d_ddot = self.separation(t)
        return d_ddot - self.C * np.exp(-2.0 * self.kappa * d)

    def phase(self, t):
        """gamma_1 = omega t - (d'(d + 1/sqrt(omega)) - v^2 t)/4, so gamma_1' = omega - d'' d/4."""
        t = np.asarray(t, dtype=float)
        d, d_dot, _ = self.separation(t)
        return self.omega * t - 0.25 * (d_dot * (d + 1.0 / self.kappa) - self.v**2 * t)

    def phase_rate(self, t):
        d, _, d_ddot = self.separation(t)
        return self.omega - 0.25 * d_ddot * d

    def time_to_separation(self, factor: Optional[float] = None) -> float:
        """Smallest t >= 0 with e^{-2 sqrt(omega) d(t)} <= factor * v^2."""
        factor = settings.SEPARATION_FACTOR if factor is None else factor
        ratio = np.sqrt(self.kappa / (factor * self.C))
        if ratio <= 1.0:
            return 0.0
        return float(np.arccosh(ratio) / (self.kappa * self.v))

    def integrate(self, t) -> Tuple[np.ndarray, np.ndarray]:
        """Numerically integrate d'' = C e^{-2 sqrt(omega) d} from (d(0), 0); returns (d, d_dot) at t."""
        t = np.atleast_1d(np.asarray(t, dtype=float))
        horizon = float(np.max(np.abs(t))) if t.size else 0.0
        kappa, C = self.kappa, self.C

        def rhs(_, y):
            return [y[1], C * np.exp(-2.0 * kappa * y[0])]

        if horizon == 0.0:
            return np.full_like(t, self.d0), np.zeros_like(t)
        solution = solve_ivp(
            rhs, (0.0, horizon), [self.d0, 0.0], method="DOP853",
            rtol=settings.SEPARATION_RTOL, atol=settings.SEPARATION_RTOL, dense_output=True,
        )
        if not solution.success:
            raise NumericalError(f"Separation ODE integration failed: {solution.message}")
        d, d_dot = solution.sol(np.abs(t))
        return d, np.sign(t) * d_dot


def interaction_routes(profile: SolitonProfile) -> Dict[str, float]:
    """C by the interaction integral and by the tail identity, plus the identity integral itself."""
    F = profile.nonlinearity
    kappa, a = profile.kappa, profile.a_inf
    x, phi = profile.x, profile.phi
    integral = float(trapezoid(F.dF(phi**2) * phi * np.exp(-kappa * x), x))
    return {
        "integral": integral,
        "identity": 2.0 * a * kappa,
        "route_integral": 4.0 * a * kappa * integral / profile.mass,
        "route_tail": 8.0 * a**2 * profile.omega / profile.mass,
    }


def interaction_constant(profile: SolitonProfile, F: Optional[PolynomialNonlinearity] = None) -> float:
    """
    C = (4 a sqrt(omega)/||phi||^2) int F'(phi^2) phi e^{-sqrt(omega) x} dx, checked against 8 a^2 omega/||phi||^2.

    Raises:
        CrossCheckFailed: when the two routes differ by more than CROSS_CHECK_TOL relative
    """
    if F is not None and F != profile.nonlinearity:
        raise ConfigError("Nonlinearity does not match the profile")
    routes = interaction_routes(profile)
    first, second = routes["route_integral"], routes["route_tail"]
    mismatch = abs(first - second) / abs(second)
    if mismatch > settings.CROSS_CHECK_TOL:
        raise CrossCheckFailed(
            f"Interaction constant routes disagree: {first:.10g} vs {second:.10g} ({mismatch:.2e})",
            detail={**routes, "mismatch": mismatch},
        )
    logger.debug(f"Interaction constant C={first:.12g} (tail route {second:.12g})")
    return first


def separation(dyn: InteractionDynamics, t):
    return dyn.separation(t)


# Ansatz states


def smoothstep(s):
    """Quintic smoothstep: 0 for s <= 0, 1 for s >= 1, C^2."""
    s = np.clip(s, 0.0, 1.0)
    return s**3 * (10.0 - 15.0 * s + 6.0 * s**2)


@dataclass(frozen=True, eq=False)
class AnsatzTerm:
    """c(t) g(x - zeta) with g' and, for tabulated profiles, dg/dt at fixed y."""

    coefficient: float
    coefficient_dot: float
    values: np.ndarray
    derivative: np.ndarray
    explicit_dot: Optional[np.ndarray] = None


@dataclass(frozen=True, eq=False)
class AnsatzState:
    params: SolitonParams
    rates: Tuple[float, float, float]  # (zeta_dot, v_dot, gamma_dot)
    terms: List[AnsatzTerm]
    symmetric: bool = True

    def fields(self, grid: SpectralGrid) -> Tuple[ComplexField, ComplexField]:
        """(u, u_t) on the grid."""
        p = self.params
        zeta_dot, v_dot, gamma_dot = self.rates
        x = grid.x
        G = sum(term.coefficient * term.values for term in self.terms)
        G_prime = sum(term.coefficient * term.derivative for term in self.terms)
        G_dot = sum(term.coefficient_dot * term.values for term in self.terms)
        for term in self.terms:
            if term.explicit_dot is not None:
                G_dot = G_dot + term.coefficient * term.explicit_dot

        G = np.asarray(G, dtype=complex)
        peak = np.max(np.abs(G))
        edge = max(abs(G[0]), abs(G[-1]))
        if peak > 0 and edge > settings.WRAP_TOLERANCE * peak:
            raise WrapAround(
                f"Ansatz at zeta={p.zeta:.4g} reaches the grid edge ({edge / peak:.2e} of the peak)",
                detail={"zeta": p.zeta, "edge_ratio": float(edge / peak)},
            )

        phase = np.exp(1j * p.phase(x))
        alpha_t = 0.5 * v_dot * (x - 0.5 * p.zeta) - 0.25 * p.v * zeta_dot + gamma_dot
        W = phase * G
        W_t = phase * (1j * alpha_t * G - zeta_dot * G_prime + G_dot)
        u, u_t = grid.field(W), grid.field(W_t)
        if self.symmetric:
            u, u_t = u - u.mirror(), u_t - u_t.mirror()
        return u, u_t


def state_residual(state: AnsatzState, grid: SpectralGrid, F: PolynomialNonlinearity) -> ComplexField:
    """Lambda(u) = i u_t + u_xx + F'(|u|^2) u."""
    u, u_t = state.fields(grid)
    return 1j * u_t + u.derivative(2) + F.dF(np.abs(u.values) ** 2) * u


@dataclass(frozen=True)
class Schedule:
    params: SolitonParams
    rates: Tuple[float, float, float]
    coefficients: List[Tuple[float, float]]


class _Shifter:
    """Spectral translates of a grid field and its derivative."""

    def __init__(self, f: ComplexField):
        self.grid = f.grid
        self.spectrum = f.spectrum()
        self.derivative_spectrum = 1j * f.grid.k_odd * self.spectrum

    def at(self, zeta: float) -> Tuple[np.ndarray, np.ndarray]:
        phase = np.exp(-1j * self.grid.k * zeta)
        return np.fft.ifft(phase * self.spectrum), np.fft.ifft(phase * self.derivative_spectrum)


@dataclass(frozen=True, eq=False)
class CorrectionSet:
    """p1 real, p2 and p3 purely imaginary; centred at x = 0 on the operator grid."""

    p1: ComplexField
    p2: ComplexField
    p3: ComplexField
    variant: Variant


def corrections(
    profile: SolitonProfile,
    F: Optional[PolynomialNonlinearity],
    S: LinearizedOperator,
    variant: Optional[Variant] = None,
) -> CorrectionSet:
    """
    Solve for the order-1 corrections p1, p2, p3.

    "displayed":
        p1 = -a S^-1 Pi_perp[F' e^{-2k y} + 2 F'' phi^2 e^{-k y}]
        p2 = -2k S^-1 Pi_perp[i p1] + S^-1 Pi_perp[i y F' e^{-2k y}]
        p3 = S^-1 Pi_perp[i F' e^{-2k y}]
    "balanced" (every interaction term on e^{-k y}, kernel-only projection):
        p1 = S^-1 K_perp[-(C/2) y phi - a (F' + 2 F'' phi^2) e^{-k y}]
        p2 = S^-1 K_perp[-2k i p1 + i a y F' e^{-k y}]
        p3 = S^-1 K_perp[i a F' e^{-k y}]
    with k = sqrt(omega), a = a_inf, F' and F'' evaluated at phi^2.
    """
    variant = variant or settings.CORRECTION_VARIANT
    if F is not None and F != profile.nonlinearity:
        raise ConfigError("Nonlinearity does not match the profile")
    F = profile.nonlinearity
    y = S.grid.x
    kappa, a = profile.kappa, profile.a_inf
    phi = S.phi
    dF, d2F = F.dF(phi**2), F.d2F(phi**2)
    field = S.field

    if variant == "displayed":
        basis = ProjectionBasis.pi(S)
        perp = basis.complement
        p1 = -a * invert_projected(S, perp(field(dF * np.exp(-2.0 * kappa * y) + 2.0 * d2F * phi**2 * np.exp(-kappa * y))))
        p2 = -2.0 * kappa * invert_projected(S, perp(1j * p1)) + invert_projected(
            S, perp(field(1j * y * dF * np.exp(-2.0 * kappa * y)))
        )
        p3 = invert_projected(S, perp(field(1j * dF * np.exp(-2.0 * kappa * y))))
    elif variant == "balanced":
        C = interaction_constant(profile)
        decay = np.exp(-kappa * y)

        def solve(source: ComplexField) -> ComplexField:
            return invert_projected(S, kernel_complement(S, source))

        p1 = solve(field(-0.5 * C * y * phi - a * (dF + 2.0 * d2F * phi**2) * decay))
        p2 = solve(-2.0 * kappa * 1j * p1 + field(1j * a * y * dF * decay))
        p3 = solve(field(1j * a * dF * decay))
    else:
        raise ConfigError(f"Unknown correction variant '{variant}'")

    # p1 is real, p2 and p3 are imaginary up to solver round-off
    p1 = field(p1.values.real)
    p2 = field(1j * p2.values.imag)
    p3 = field(1j * p3.values.imag)
    logger.info(
        f"Corrections ({variant}): |p1|={p1.norm():.4g}, |p2|={p2.norm():.4g}, |p3|={p3.norm():.4g}"
    )
    return CorrectionSet(p1=p1, p2=p2, p3=p3, variant=variant)


class ApproximateSolution:
    """
    Order-0 or order-1 two-soliton ansatz.

    Order 0: zeta = d, v = d', gamma = omega t.
    Order 1: adds E p1 + d' E p2 + d d' E p3 with E = e^{-2 sqrt(omega) d};
    the balanced variant also runs the phase gamma_1.
    """

    symmetric = True

    def __init__(
        self,
        order: int,
        profile: SolitonProfile,
        dynamics: InteractionDynamics,
        grid: SpectralGrid,
        operator: Optional[LinearizedOperator] = None,
        correction_set: Optional[CorrectionSet] = None,
        variant: Optional[Variant] = None,
    ):
        if order not in (0, 1):
            raise ConfigError(f"Closed-form ansatz order must be 0 or 1, got {order}")
        if abs(dynamics.omega - profile.omega) > 1e-14 * profile.omega:
            raise ConfigError("Dynamics and profile use different omega")
        self.order = order
        self.profile = profile
        self.dynamics = dynamics
        self.grid = grid
        self.F = profile.nonlinearity
        self.corrections: Optional[CorrectionSet] = None
        self._shifters: List[_Shifter] = []
        if order == 1:
            if correction_set is None:
                operator = operator or LinearizedOperator(profile, grid)
                correction_set = corrections(profile, None, operator, variant)
            if correction_set.p1.grid != grid:
                raise ConfigError("Corrections were computed on a different grid")
            self.corrections = correction_set
            self._shifters = [_Shifter(p) for p in (correction_set.p1, correction_set.p2, correction_set.p3)]

    @property
    def variant(self) -> Optional[str]:
        return self.corrections.variant if self.corrections else None

    def schedule(self, t: float) -> Schedule:
        dyn = self.dynamics
        d, d_dot, d_ddot = (float(q) for q in dyn.separation(t))
        coefficients = [(1.0, 0.0)]
        if self.order == 1 and self.variant == "balanced":
            gamma, gamma_dot = float(dyn.phase(t)), float(dyn.phase_rate(t))
        else:
            gamma, gamma_dot = dyn.omega * t, dyn.omega
        if self.order == 1:
            E = float(dyn.interaction(t))
            E_dot = -2.0 * dyn.kappa * d_dot * E
            coefficients += [
                (E, E_dot),
                (d_dot * E, d_ddot * E + d_dot * E_dot),
                (d * d_dot * E, (d_dot**2 + d * d_ddot) * E + d * d_dot * E_dot),
            ]
        params = SolitonParams(zeta=d, v=d_dot, gamma=gamma, omega=dyn.omega)
        return Schedule(params=params, rates=(d_dot, d_ddot, gamma_dot), coefficients=coefficients)

    def terms_at(self, zeta: float, coefficients: Sequence[Tuple[float, float]]) -> List[AnsatzTerm]:
        y = self.grid.x - zeta
        (c, c_dot), rest = coefficients[0], coefficients[1:]
        terms = [AnsatzTerm(c, c_dot, self.profile.sample(y), self.profile.sample_derivative(y))]
        for shifter, (c, c_dot) in zip(self._shifters, rest):
            values, derivative = shifter.at(zeta)
            terms.append(AnsatzTerm(c, c_dot, values, derivative))
        return terms

    def state(self, t: float) -> AnsatzState:
        schedule = self.schedule(t)
        return AnsatzState(
            params=schedule.params,
            rates=schedule.rates,
            terms=self.terms_at(schedule.params.zeta, schedule.coefficients),
            symmetric=self.symmetric,
        )

    def params(self, t: float) -> SolitonParams:
        return self.schedule(t).params

    def field(self, t: float) -> ComplexField:
        return self.state(t).fields(self.grid)[0]

    def residual(self, t: float) -> ComplexField:
        return state_residual(self.state(t), self.grid, self.F)


class SingleSoliton(ApproximateSolution):
    """One boosted soliton e^{i(v/2)(x - vt/2) + i(omega t + gamma0)} phi(x - zeta0 - vt); an exact solution."""

    symmetric = False

    def __init__(self, profile: SolitonProfile, v: float, grid: SpectralGrid, zeta0: float = 0.0, gamma0: float = 0.0):
        self.order = 0
        self.profile = profile
        self.grid = grid
        self.F = profile.nonlinearity
        self.v = float(v)
        self.zeta0 = float(zeta0)
        self.gamma0 = float(gamma0)
        self.dynamics = None
        self.corrections = None
        self._shifters = []

    def schedule(self, t: float) -> Schedule:
        omega = self.profile.omega
        params = SolitonParams(zeta=self.zeta0 + self.v * t, v=self.v, gamma=self.gamma0 + omega * t, omega=omega)
        return Schedule(params=params, rates=(self.v, 0.0, omega), coefficients=[(1.0, 0.0)])


def build(
    order: int,
    profile: SolitonProfile,
    dyn: InteractionDynamics,
    grid: SpectralGrid,
    t: float,
    operator: Optional[LinearizedOperator] = None,
    variant: Optional[Variant] = None,
) -> ComplexField:
    """The order-0 or order-1 two-soliton field at time t."""
    return ApproximateSolution(order, profile, dyn, grid, operator=operator, variant=variant).field(t)


def residual(approx: ApproximateSolution, t: float, grid: Optional[SpectralGrid] = None, F=None) -> ComplexField:
    if grid is not None and grid != approx.grid:
        raise ConfigError("Residual grid differs from the ansatz grid")
    return approx.residual(t)


# Numerical refinement


@dataclass(frozen=True, eq=False)
class RefinementStep:
    t: float
    rates: Tuple[float, float, float, float]  # corrections to (gamma', v', zeta', f')
    q: ComplexField
    q_dot: ComplexField
    base_norm: float = float("nan")
    refined_norm: float = float("nan")


def _modulation_fields(S: LinearizedOperator, params: SolitonParams) -> List[ComplexField]:
    """Rate directions in the right-soliton frame, ordered (gamma', v', zeta', f')."""
    y, phi = S.grid.x, S.phi
    return [
        S.field(-phi),
        S.field(-(0.5 * y + 0.25 * params.zeta) * phi),
        S.field(0.25 * params.v * phi - 1j * S.dphi),
        S.field(1j * S.d_omega_phi),
    ]


def _frame_residual(approx: ApproximateSolution, t: float) -> Tuple[ComplexField, SolitonParams]:
    """The right-soliton share of Lambda, unrotated and moved to y = x - zeta."""
    schedule = approx.schedule(t)
    p = schedule.params
    Lambda = approx.residual(t)
    x = approx.grid.x
    if approx.symmetric:
        if not p.zeta > 0:
            raise ConfigError(f"Refinement needs separated solitons (zeta={p.zeta:.4g})")
        Lambda = Lambda * smoothstep((x + 0.5 * p.zeta) / p.zeta)
    rotated = Lambda * np.exp(-1j * p.phase(x))
    return rotated.shift(-p.zeta), p


def _refine_at(approx: ApproximateSolution, S: LinearizedOperator, t: float):
    rho, params = _frame_residual(approx, t)
    basis = ProjectionBasis.pi(S)
    fields = _modulation_fields(S, params)
    matrix = np.array([[inner(m, e) for m in fields] for e in basis.vectors])
    rhs = -np.array([inner(rho, e) for e in basis.vectors])
    try:
        rates = np.linalg.solve(matrix, rhs)
    except np.linalg.LinAlgError as e:
        raise SingularGram(f"Rate balance system is singular at t={t:g}") from e
    source = rho
    for rate, m in zip(rates, fields):
        source = source + rate * m
    return tuple(float(r) for r in rates), invert_projected(S, source)


class RefinedSolution:
    """Base ansatz plus the tabulated correction q(t) and the rate corrections that balance it."""

    order = "refined"

    def __init__(self, base: ApproximateSolution, operator: LinearizedOperator, steps: Dict[float, RefinementStep]):
        self.base = base
        self.operator = operator
        self.steps = steps
        self.grid = base.grid
        self.profile = base.profile
        self.F = base.F
        self.symmetric = base.symmetric

    @property
    def times(self) -> List[float]:
        return sorted(self.steps)

    def _step(self, t: float) -> RefinementStep:
        for key, entry in self.steps.items():
            if np.isclose(key, t, rtol=0.0, atol=1e-12 * max(1.0, abs(t))):
                return entry
        raise ConfigError(f"t={t:g} is not tabulated; refined times are {self.times}")

    def state(self, t: float) -> AnsatzState:
        entry = self._step(t)
        schedule = self.base.schedule(t)
        p = schedule.params
        d_gamma, d_v, d_zeta, d_f = entry.rates
        y = self.grid.x - p.zeta
        terms = self.base.terms_at(p.zeta, schedule.coefficients)
        q_values, q_derivative = _Shifter(entry.q).at(p.zeta)
        terms.append(AnsatzTerm(1.0, 0.0, q_values, q_derivative, explicit_dot=entry.q_dot.shift(p.zeta).values))
        terms.append(AnsatzTerm(0.0, d_f, self.profile.sample_d_omega(y), self.profile.d_omega.derivative(y)))
        zeta_dot, v_dot, gamma_dot = schedule.rates
        return AnsatzState(
            params=p,
            rates=(zeta_dot + d_zeta, v_dot + d_v, gamma_dot + d_gamma),
            terms=terms,
            symmetric=self.symmetric,
        )

    def field(self, t: float) -> ComplexField:
        return self.state(t).fields(self.grid)[0]

    def residual(self, t: float) -> ComplexField:
        return state_residual(self.state(t), self.grid, self.F)

    def parameter_shifts(self) -> Dict[str, np.ndarray]:
        """Rate corrections integrated from the tabulated time closest to 0."""
        times = np.array(self.times)
        rates = np.array([self.steps[t].rates for t in self.times])
        if times.size < 2:
            return {key: np.zeros(times.size) for key in ("gamma", "v", "zeta", "f_omega")}
        origin = int(np.argmin(np.abs(times)))
        shifts = {}
        for j, key in enumerate(("gamma", "v", "zeta", "f_omega")):
            cumulative = np.concatenate([[0.0], np.cumsum(0.5 * np.diff(times) * (rates[1:, j] + rates[:-1, j]))])
            shifts[key] = cumulative - cumulative[origin]
        return shifts


def refine_numeric(
    approx: ApproximateSolution,
    linop: LinearizedOperator,
    t_grid: Sequence[float],
    require_improvement: bool = True,
) -> RefinedSolution:
    """
    Correct an ansatz at each tabulated time by inverting S on its frame residual.

    Args:
        approx: Order-0/1 ansatz or SingleSoliton
        linop: Linearized operator on the ansatz grid
        t_grid: Times to tabulate
        require_improvement: Raise NoImprovement when the residual does not halve

    Returns:
        RefinedSolution evaluable at the tabulated times
    """
    if linop.grid != approx.grid:
        raise ConfigError("Operator and ansatz grids differ")
    t_grid = [float(t) for t in t_grid]
    if not t_grid:
        raise InsufficientSamples("refine_numeric needs at least one time")
    speed = approx.v if isinstance(approx, SingleSoliton) else approx.dynamics.v
    delta = settings.REFINE_DT_FRACTION / (approx.profile.kappa * max(abs(speed), 1e-12))

    steps: Dict[float, RefinementStep] = {}
    for t in t_grid:
        rates, q = _refine_at(approx, linop, t)
        _, q_plus = _refine_at(approx, linop, t + delta)
        _, q_minus = _refine_at(approx, linop, t - delta)
        steps[t] = RefinementStep(t=t, rates=rates, q=q, q_dot=(q_plus - q_minus) / (2.0 * delta))
    refined = RefinedSolution(approx, linop, steps)

    worst = 0.0
    for t in t_grid:
        base_norm = approx.residual(t).h1()
        refined_norm = refined.residual(t).h1()
        steps[t] = RefinementStep(
            t=t, rates=steps[t].rates, q=steps[t].q, q_dot=steps[t].q_dot,
            base_norm=base_norm, refined_norm=refined_norm,
        )
        floor = 1e-9 * max(approx.field(t).h1(), 1.0)
        if base_norm > floor:
            worst = max(worst, refined_norm / base_norm)
        logger.debug(f"Refined t={t:g}: |Lambda| {base_norm:.3e} -> {refined_norm:.3e}")

    if require_improvement and worst > 0.5:
        raise NoImprovement(
            f"Refinement reduced the residual only by a factor {1.0 / worst:.3g}",
            detail={"ratio": worst},
        )
    return refined


# Residual scaling


@dataclass(frozen=True)
class ResidualScaling:
    order: str
    variant: Optional[str]
    t: float
    v: List[float]
    l2: List[float]
    h1: List[float]
    slope: float
    stderr: float

    def rows(self) -> List[Dict[str, float]]:
        return [
            {"v": v, "order": self.order, "t": self.t, "L2_residual": a, "H1_residual": b}
            for v, a, b in zip(self.v, self.l2, self.h1)
        ]


def fit_slope(x: Sequence[float], y: Sequence[float]) -> Tuple[float, float]:
    """Slope and stderr of log y against log x."""
    if len(x) < 2:
        raise InsufficientSamples("A slope needs at least two points")
    fit = linregress(np.log(x), np.log(y))
    stderr = float(fit.stderr) if len(x) > 2 else float("nan")
    return float(fit.slope), stderr


def residual_slope(
    profile: SolitonProfile,
    S: LinearizedOperator,
    v_list: Sequence[float],
    order: Order,
    variant: Optional[Variant] = None,
    t: float = 0.0,
    correction_set: Optional[CorrectionSet] = None,
) -> ResidualScaling:
    """||Lambda(t)|| over v for one ansatz order, with the fitted log-log slope."""
    C = interaction_constant(profile)
    if order == 1 and correction_set is None:
        correction_set = corrections(profile, None, S, variant)
    l2, h1 = [], []
    for v in v_list:
        dyn = InteractionDynamics(C=C, omega=profile.omega, v=float(v))
        if order == "refined":
            base = ApproximateSolution(0, profile, dyn, S.grid)
            approx = refine_numeric(base, S, [t], require_improvement=False)
        else:
            approx = ApproximateSolution(int(order), profile, dyn, S.grid, correction_set=correction_set)
        Lambda = approx.residual(t)
        l2.append(Lambda.norm())
        h1.append(Lambda.h1())
        logger.info(f"Residual order={order} v={v:g} t={t:g}: L2={l2[-1]:.4e}, H1={h1[-1]:.4e}")
    slope, stderr = fit_slope(v_list, h1)
    return ResidualScaling(
        order=str(order),
        variant=correction_set.variant if correction_set else None,
        t=float(t),
        v=[float(v) for v in v_list],
        l2=l2,
        h1=h1,
        slope=slope,
        stderr=stderr,
    )


def select_correction_variant(
    profile: SolitonProfile,
    S: LinearizedOperator,
    v_list: Sequence[float],
    threshold: float = 3.5,
) -> Tuple[str, Dict[str, float]]:
    """Return the first correction variant whose order-1 residual slope reaches the threshold."""
    slopes: Dict[str, float] = {}
    for variant in ("displayed", "balanced"):
        try:
            scaling = residual_slope(profile, S, v_list, 1, variant=variant)
        except NumericalError as e:
            logger.warning(f"Correction variant '{variant}' failed: {e.message}")
            slopes[variant] = float("nan")
            continue
        slopes[variant] = scaling.slope
        if scaling.slope >= threshold:
            logger.info(f"Selected correction variant '{variant}' (slope {scaling.slope:.3f})")
            return variant, slopes
    raise NoImprovement(f"No correction variant reaches slope {threshold}", detail={"slopes": slopes})
