"""Polynomial nonlinearity F and the existence hypotheses for ground states.

The PDE term is F'(|u|^2) u with F(s) = sum_{j>=2} c_j s^j, s = |u|^2.
"""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Iterable, Optional, Sequence, Tuple, Union

import numpy as np
from numpy.polynomial import Polynomial
from scipy.optimize import brentq

from app.config.settings import settings
from app.core.errors import ConfigError, DegenerateRoot, NoRoot

logger = logging.getLogger(__name__)

ArrayLike = Union[float, np.ndarray]


@dataclass(frozen=True)
class PolynomialNonlinearity:
    """F(s) = sum_j coeffs[j] * s^(j + 2); the s^0 and s^1 terms are absent."""

    coeffs: Tuple[float, ...]

    def __post_init__(self):
        coeffs = tuple(float(c) for c in self.coeffs)
        if not coeffs:
            raise ConfigError("Nonlinearity needs at least one coefficient (degree >= 2)")
        if not all(np.isfinite(coeffs)):
            raise ConfigError("Nonlinearity coefficients must be finite", detail={"coeffs": list(coeffs)})
        if not any(c != 0.0 for c in coeffs):
            raise ConfigError("Nonlinearity needs a nonzero coefficient")
        object.__setattr__(self, "coeffs", coeffs)

    # Presets

    @classmethod
    def cubic(cls) -> "PolynomialNonlinearity":
        """F(s) = s^2, i.e. the cubic NLS term 2|u|^2 u."""
        return cls((1.0,))

    @classmethod
    def cubic_quintic(cls, a: float = 2.0, b: float = 0.0) -> "PolynomialNonlinearity":
        """F'(s) = a s + b s^2."""
        return cls((a / 2.0, b / 3.0))

    @classmethod
    def triple_power(cls, a: float = 2.0, b: float = 0.0, c: float = 0.0) -> "PolynomialNonlinearity":
        """F'(s) = a s + b s^2 + c s^3."""
        return cls((a / 2.0, b / 3.0, c / 4.0))

    @classmethod
    def from_pairs(cls, pairs: Iterable[Sequence[float]]) -> "PolynomialNonlinearity":
        """Build F from (power, coefficient) pairs over s = |u|^2."""
        table = {}
        for pair in pairs:
            if len(pair) != 2:
                raise ConfigError(f"Expected (power, coefficient) pair, got {pair!r}")
            power, coefficient = pair
            if int(power) != power or power < 2:
                raise ConfigError(f"Powers must be integers >= 2 (F(0)=F'(0)=0), got {power}")
            table[int(power)] = table.get(int(power), 0.0) + float(coefficient)
        if not table:
            raise ConfigError("Empty nonlinearity specification")
        degree = max(table)
        return cls(tuple(table.get(p, 0.0) for p in range(2, degree + 1)))

    # Polynomials

    @property
    def degree(self) -> int:
        return len(self.coeffs) + 1

    @cached_property
    def polynomial(self) -> Polynomial:
        return Polynomial([0.0, 0.0, *self.coeffs])

    @cached_property
    def _derivatives(self) -> Tuple[Polynomial, Polynomial, Polynomial]:
        p = self.polynomial
        return p, p.deriv(1), p.deriv(2)

    @cached_property
    def quotient(self) -> Polynomial:
        """F(s)/s as a polynomial (used by the log-form profile equation)."""
        return Polynomial([0.0, *self.coeffs])

    def eval(self, s: ArrayLike, order: int = 0) -> ArrayLike:
        """Return F(s), F'(s) or F''(s)."""
        if order not in (0, 1, 2):
            raise ConfigError(f"Derivative order must be 0, 1 or 2, got {order}")
        return self._derivatives[order](s)

    def F(self, s: ArrayLike) -> ArrayLike:
        return self._derivatives[0](s)

    def dF(self, s: ArrayLike) -> ArrayLike:
        return self._derivatives[1](s)

    def d2F(self, s: ArrayLike) -> ArrayLike:
        return self._derivatives[2](s)

    # T_omega(y) = -omega y^2/2 + F(y^2)/2

    def T(self, y: ArrayLike, omega: float) -> ArrayLike:
        return -0.5 * omega * y**2 + 0.5 * self.F(y**2)

    def dT(self, y: ArrayLike, omega: float) -> ArrayLike:
        return -omega * y + self.dF(y**2) * y

    def to_pairs(self):
        return [(p + 2, c) for p, c in enumerate(self.coeffs) if c != 0.0]


@dataclass(frozen=True)
class ExistenceCheck:
    omega: float
    y0: float
    satisfied: bool
    reason: str
    y_max: float


def default_y_max(F: PolynomialNonlinearity, omega: float) -> float:
    scale = min(abs(c) for c in F.coeffs if c != 0.0)
    return 10.0 * float(np.sqrt(omega / scale))


def check_existence(
    F: PolynomialNonlinearity,
    omega: float,
    y_max: Optional[float] = None,
    scan_points: Optional[int] = None,
) -> ExistenceCheck:
    """
    Locate the first positive zero of T_omega and check the ground-state hypotheses.

    Args:
        F: The nonlinearity
        omega: Frequency (> 0)
        y_max: Upper end of the scan; defaults to 10*sqrt(omega/min|c_j|)
        scan_points: Number of scan points (settings.ROOT_SCAN_POINTS)

    Returns:
        ExistenceCheck with y0 and the satisfied flag
    """
    if not omega > 0:
        raise ConfigError(f"omega must be positive, got {omega}")
    y_max = default_y_max(F, omega) if y_max is None else float(y_max)
    if not y_max > 0:
        raise ConfigError(f"y_max must be positive, got {y_max}")
    scan_points = scan_points or settings.ROOT_SCAN_POINTS

    # T/y^2 has the sign of T and stays O(1) near y = 0
    def g(y):
        return -0.5 * omega + 0.5 * F.quotient(y**2)

    ys = np.linspace(0.0, y_max, scan_points + 1)[1:]
    values = g(ys)
    crossings = np.nonzero((values[:-1] < 0.0) & (values[1:] >= 0.0))[0]
    if values[0] >= 0.0 or crossings.size == 0:
        raise NoRoot(
            f"T_omega has no sign change on (0, {y_max:g}] for omega={omega:g}",
            detail={"omega": omega, "y_max": y_max},
        )

    i = int(crossings[0])
    if values[i + 1] == 0.0:
        y0 = float(ys[i + 1])
    else:
        y0 = float(brentq(g, ys[i], ys[i + 1], xtol=settings.ROOT_XTOL))

    slope = float(F.dT(y0, omega))
    if abs(slope) < settings.ROOT_SLOPE_TOL:
        raise DegenerateRoot(
            f"T_omega'(y0) = {slope:.3e} at y0={y0:.12g} is below tolerance",
            detail={"omega": omega, "y0": y0, "slope": slope},
        )

    if slope <= 0.0:
        reason = f"T_omega'(y0) = {slope:.3e} is not positive"
        satisfied = False
    elif np.any(values[ys > y0] <= 0.0):
        bad = float(ys[ys > y0][values[ys > y0] <= 0.0][0])
        reason = f"T_omega returns to non-positive values at y={bad:.6g} <= y_max={y_max:g}"
        satisfied = False
    else:
        reason = f"y0={y0:.12g}, T'(y0)={slope:.6g}, T>0 on (y0, {y_max:g}]"
        satisfied = True

    logger.debug(f"Existence check omega={omega:g}: {reason}")
    return ExistenceCheck(omega=float(omega), y0=y0, satisfied=satisfied, reason=reason, y_max=y_max)
