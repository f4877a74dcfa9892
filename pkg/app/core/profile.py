"""Ground-state profile phi_omega, its omega-derivative and tail amplitude.

phi solves -phi'' + omega*phi - F'(phi^2)*phi = 0, phi(0) = y0, phi even and
decreasing on x > 0.
"""

import logging
from dataclasses import dataclass, field, replace
from typing import Optional

import numpy as np
from scipy.integrate import solve_ivp, trapezoid

from app.config.settings import settings
from app.core.errors import ConfigError, ProfileBlowup, StepTooLarge, TailUnresolved
from app.core.nonlinearity import PolynomialNonlinearity, check_existence

logger = logging.getLogger(__name__)


class ProfileEvaluator:
    """
    Piecewise representation of phi_omega on x >= 0, evaluated at |x|.

    Crest segment: second-order ODE from (y0, 0) down to y0/2.
    Decay segment: psi = ln(phi), psi' = -sqrt(omega - F(phi^2)/phi^2).
    Tail: pure exponential once phi < PROFILE_TAIL_RATIO * y0.
    """

    def __init__(self, F: PolynomialNonlinearity, omega: float, y0: float):
        self.F = F
        self.omega = float(omega)
        self.kappa = float(np.sqrt(omega))
        self.y0 = float(y0)
        self._solve()

    def _radicand(self, phi2):
        return self.omega - self.F.quotient(phi2)

    def _solve(self):
        F, omega, kappa, y0 = self.F, self.omega, self.kappa, self.y0
        rtol = settings.PROFILE_RTOL
        atol = settings.PROFILE_ATOL * y0

        def crest_rhs(x, y):
            return [y[1], omega * y[0] - F.dF(y[0] ** 2) * y[0]]

        def half_height(x, y):
            return y[0] - 0.5 * y0

        half_height.terminal = True
        half_height.direction = -1

        crest = solve_ivp(
            crest_rhs, (0.0, 50.0 / kappa), [y0, 0.0],
            method="DOP853", rtol=rtol, atol=atol, dense_output=True, events=half_height,
        )
        if crest.status != 1 or not crest.t_events[0].size:
            raise ProfileBlowup(
                f"Crest integration did not reach y0/2 (status={crest.status}: {crest.message})",
                detail={"omega": omega, "y0": y0},
            )
        self.x_crest = float(crest.t_events[0][0])
        self._crest = crest.sol
        phi_crest = float(crest.y_events[0][0][0])

        tolerance = settings.RADICAND_TOL * omega

        def decay_rhs(x, psi):
            radicand = self._radicand(np.exp(2.0 * psi[0]))
            if radicand < -tolerance:
                raise ProfileBlowup(
                    f"Radicand omega - F(phi^2)/phi^2 = {radicand:.3e} < 0 at x={x:.6g}",
                    detail={"omega": omega, "x": float(x), "radicand": float(radicand)},
                )
            return [-np.sqrt(max(radicand, 0.0))]

        floor = np.log(settings.PROFILE_TAIL_RATIO * y0)

        def tail_reached(x, psi):
            return psi[0] - floor

        tail_reached.terminal = True
        tail_reached.direction = -1

        decay = solve_ivp(
            decay_rhs, (self.x_crest, self.x_crest + 200.0 / kappa), [np.log(phi_crest)],
            method="DOP853", rtol=rtol, atol=1e-14, dense_output=True, events=tail_reached,
        )
        if decay.status != 1 or not decay.t_events[0].size:
            raise ProfileBlowup(
                f"Decay integration did not reach the tail (status={decay.status}: {decay.message})",
                detail={"omega": omega},
            )
        self.x_tail = float(decay.t_events[0][0])
        self._decay = decay.sol
        self.phi_tail = float(np.exp(decay.y_events[0][0][0]))
        logger.debug(
            f"Profile omega={omega:g}: crest to x={self.x_crest:.4f}, tail from x={self.x_tail:.4f}"
        )

    def _segments(self, s):
        crest = s <= self.x_crest
        tail = s > self.x_tail
        return crest, ~(crest | tail), tail

    def __call__(self, x) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        s = np.abs(np.atleast_1d(x)).ravel()
        out = np.empty_like(s)
        crest, decay, tail = self._segments(s)
        if crest.any():
            out[crest] = self._crest(s[crest])[0]
        if decay.any():
            out[decay] = np.exp(self._decay(s[decay])[0])
        if tail.any():
            out[tail] = self.phi_tail * np.exp(-self.kappa * (s[tail] - self.x_tail))
        return out.reshape(x.shape)

    def derivative(self, x) -> np.ndarray:
        """phi'(x), odd in x."""
        x = np.asarray(x, dtype=float)
        flat = np.atleast_1d(x).ravel()
        s = np.abs(flat)
        out = np.empty_like(s)
        crest, decay, tail = self._segments(s)
        if crest.any():
            out[crest] = self._crest(s[crest])[1]
        if decay.any():
            phi = np.exp(self._decay(s[decay])[0])
            out[decay] = -phi * np.sqrt(np.maximum(self._radicand(phi**2), 0.0))
        if tail.any():
            out[tail] = -self.kappa * self.phi_tail * np.exp(-self.kappa * (s[tail] - self.x_tail))
        return (np.sign(flat) * out).reshape(x.shape)


class DOmegaEvaluator:
    """Central difference (phi_{omega+h} - phi_{omega-h}) / 2h at any abscissa."""

    def __init__(self, F: PolynomialNonlinearity, omega: float, h_omega: Optional[float] = None):
        self.h = float(h_omega if h_omega is not None else settings.D_OMEGA_STEP * omega)
        if not 0.0 < self.h < omega:
            raise ConfigError(f"h_omega must lie in (0, omega), got {self.h}")
        self.plus = _evaluator(F, omega + self.h)
        self.minus = _evaluator(F, omega - self.h)

    def __call__(self, x) -> np.ndarray:
        return (self.plus(x) - self.minus(x)) / (2.0 * self.h)

    def derivative(self, x) -> np.ndarray:
        return (self.plus.derivative(x) - self.minus.derivative(x)) / (2.0 * self.h)


def _evaluator(F: PolynomialNonlinearity, omega: float) -> ProfileEvaluator:
    check = check_existence(F, omega)
    if not check.satisfied:
        raise ProfileBlowup(f"Ground-state hypotheses fail at omega={omega:g}: {check.reason}")
    return ProfileEvaluator(F, omega, check.y0)


@dataclass(frozen=True, eq=False)
class SolitonProfile:
    """Sampled ground state with its derived constants."""

    omega: float
    x: np.ndarray
    phi: np.ndarray
    dphi_domega: np.ndarray
    y0: float
    a_inf: float
    mass: float
    nonlinearity: PolynomialNonlinearity
    decay_rate: float = float("nan")
    evaluator: ProfileEvaluator = field(default=None, repr=False)
    d_omega: DOmegaEvaluator = field(default=None, repr=False)

    @property
    def kappa(self) -> float:
        return float(np.sqrt(self.omega))

    @property
    def half_length(self) -> float:
        return float(self.x[-1])

    def sample(self, x) -> np.ndarray:
        return self.evaluator(x)

    def sample_derivative(self, x) -> np.ndarray:
        return self.evaluator.derivative(x)

    def sample_d_omega(self, x) -> np.ndarray:
        return self.d_omega(x)

    def metadata(self) -> dict:
        return {"omega": self.omega, "y0": self.y0, "a_inf": self.a_inf, "mass": self.mass}


@dataclass(frozen=True)
class TailFit:
    a_inf: float
    decay_rate: float
    residual: float
    points: int


def solve_profile(
    F: PolynomialNonlinearity,
    omega: float,
    half_length: Optional[float] = None,
    n: Optional[int] = None,
    h_omega: Optional[float] = None,
) -> SolitonProfile:
    """
    Compute phi_omega on a symmetric uniform abscissa.

    Args:
        F: The nonlinearity
        omega: Frequency
        half_length: Half width of the sample window (default 40/sqrt(omega))
        n: Number of samples (default settings.PROFILE_POINTS)
        h_omega: Step for d/domega (default 1e-4*omega)

    Returns:
        SolitonProfile with phi, d phi/d omega, y0, a_inf and mass
    """
    kappa = float(np.sqrt(omega)) if omega > 0 else float("nan")
    if not omega > 0:
        raise ConfigError(f"omega must be positive, got {omega}")
    half_length = float(half_length) if half_length is not None else settings.PROFILE_HALF_LENGTH / kappa
    n = int(n) if n is not None else settings.PROFILE_POINTS
    if n < 512:
        raise ConfigError(f"Profile needs n >= 512 samples, got {n}")
    if half_length < 10.0 / kappa:
        raise ConfigError(f"half_length must be >= 10/sqrt(omega) = {10.0 / kappa:.4g}, got {half_length}")

    evaluator = _evaluator(F, omega)
    d_omega = DOmegaEvaluator(F, omega, h_omega)
    x = np.linspace(-half_length, half_length, n)
    phi = evaluator(x)

    profile = SolitonProfile(
        omega=float(omega),
        x=x,
        phi=phi,
        dphi_domega=d_omega(x),
        y0=evaluator.y0,
        a_inf=float("nan"),
        mass=float(trapezoid(phi**2, x)),
        nonlinearity=F,
        evaluator=evaluator,
        d_omega=d_omega,
    )
    fit = tail_fit(profile)
    profile = replace(profile, a_inf=fit.a_inf, decay_rate=fit.decay_rate)
    logger.info(
        f"Solved profile omega={omega:g}: y0={profile.y0:.12g}, mass={profile.mass:.12g}, a_inf={profile.a_inf:.10g}"
    )
    return profile


def d_omega_profile(
    F: PolynomialNonlinearity,
    omega: float,
    h_omega: Optional[float] = None,
    x: Optional[np.ndarray] = None,
) -> np.ndarray:
    """Samples of d phi_omega / d omega on x (default: the standard profile abscissa)."""
    if x is None:
        half_length = settings.PROFILE_HALF_LENGTH / np.sqrt(omega)
        x = np.linspace(-half_length, half_length, settings.PROFILE_POINTS)
    return DOmegaEvaluator(F, omega, h_omega)(x)


def _mass_at(F: PolynomialNonlinearity, omega: float, x: np.ndarray) -> float:
    return float(trapezoid(_evaluator(F, omega)(x) ** 2, x))


def stability_margin(
    F: PolynomialNonlinearity,
    omega: float,
    h_omega: Optional[float] = None,
    half_length: Optional[float] = None,
    n: Optional[int] = None,
) -> float:
    """
    dQ/domega by central differences, checked against the 2h estimate.

    Raises:
        StepTooLarge: when the h and 2h estimates disagree beyond RICHARDSON_TOL
    """
    h = float(h_omega if h_omega is not None else settings.D_OMEGA_STEP * omega)
    if not 0.0 < 2.0 * h < omega:
        raise ConfigError(f"h_omega must lie in (0, omega/2), got {h}")
    half_length = half_length or settings.PROFILE_HALF_LENGTH / np.sqrt(omega - 2.0 * h)
    x = np.linspace(-half_length, half_length, n or settings.PROFILE_POINTS)

    masses = {k: _mass_at(F, omega + k * h, x) for k in (-2, -1, 1, 2)}
    margin = (masses[1] - masses[-1]) / (2.0 * h)
    coarse = (masses[2] - masses[-2]) / (4.0 * h)
    disagreement = abs(margin - coarse) / max(abs(margin), np.finfo(float).tiny)
    if disagreement > settings.RICHARDSON_TOL:
        raise StepTooLarge(
            f"dQ/domega estimates with h={h:g} and 2h disagree by {disagreement:.2e}",
            detail={"h_omega": h, "margin": margin, "coarse": coarse},
        )
    logger.debug(f"Stability margin omega={omega:g}: dQ/domega={margin:.10g}")
    return float(margin)


def tail_fit(profile: SolitonProfile) -> TailFit:
    """Fit log(phi) ~ log(a) - sqrt(omega) x on the tail window."""
    x, phi = profile.x, profile.phi
    window = (x > 0.0) & (phi >= settings.TAIL_FIT_LOW) & (phi <= settings.TAIL_FIT_HIGH * profile.y0)
    points = int(np.count_nonzero(window))
    if points < settings.TAIL_FIT_MIN_POINTS:
        raise TailUnresolved(
            f"Tail window has {points} samples; widen half_length or add points",
            detail={"omega": profile.omega, "half_length": profile.half_length},
        )
    xs, logs = x[window], np.log(phi[window])
    shifted = logs + profile.kappa * xs
    log_a = float(np.mean(shifted))
    residual = float(np.max(np.abs(np.expm1(shifted - log_a))))
    if residual > settings.TAIL_FIT_TOL:
        raise TailUnresolved(
            f"Exponential tail fit residual {residual:.2e} exceeds {settings.TAIL_FIT_TOL:g}",
            detail={"omega": profile.omega, "residual": residual},
        )
    slope = np.polyfit(xs, logs, 1)[0]
    return TailFit(a_inf=float(np.exp(log_a)), decay_rate=float(-slope), residual=residual, points=points)


def asymptotic_amplitude(profile: SolitonProfile) -> float:
    """a_inf with phi(x) e^{sqrt(omega) x} -> a_inf as x -> +inf."""
    return tail_fit(profile).a_inf
