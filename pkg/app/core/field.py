"""Periodic spectral grid, complex fields, placement and Galilean boosts."""

import logging
from dataclasses import dataclass
from functools import cached_property
from typing import Callable, Optional, Union

import numpy as np

from app.config.settings import settings
from app.core.errors import ConfigError, GridMismatch, WrapAround

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class SpectralGrid:
    """Uniform periodic grid x_j = -L/2 + j*dx on [-L/2, L/2)."""

    n: int
    length: float

    def __post_init__(self):
        if self.n < 256 or self.n & (self.n - 1):
            raise ConfigError(f"Grid size must be a power of two >= 256, got {self.n}")
        if not (np.isfinite(self.length) and self.length > 0):
            raise ConfigError(f"Grid length must be positive, got {self.length}")
        object.__setattr__(self, "n", int(self.n))
        object.__setattr__(self, "length", float(self.length))

    @classmethod
    def default(cls) -> "SpectralGrid":
        return cls(settings.GRID_N, settings.GRID_LENGTH)

    @property
    def dx(self) -> float:
        return self.length / self.n

    @cached_property
    def x(self) -> np.ndarray:
        return -0.5 * self.length + self.dx * np.arange(self.n)

    @cached_property
    def k(self) -> np.ndarray:
        return 2.0 * np.pi * np.fft.fftfreq(self.n, d=self.dx)

    @cached_property
    def k_odd(self) -> np.ndarray:
        """Wavenumbers with the Nyquist mode zeroed, for odd-order derivatives."""
        k = self.k.copy()
        k[self.n // 2] = 0.0
        return k

    @cached_property
    def mirror_index(self) -> np.ndarray:
        """Index of -x_j: (n - j) mod n."""
        return (-np.arange(self.n)) % self.n

    @property
    def k_max(self) -> float:
        return float(np.max(np.abs(self.k)))

    def zeros(self) -> "ComplexField":
        return ComplexField(self, np.zeros(self.n, dtype=complex))

    def field(self, values) -> "ComplexField":
        return ComplexField(self, np.asarray(values, dtype=complex))

    def sample(self, f: Callable[[np.ndarray], np.ndarray]) -> "ComplexField":
        return self.field(f(self.x))

    def metadata(self) -> dict:
        return {"n": self.n, "L": self.length, "dx": self.dx}


def _check_grids(a: "ComplexField", b: "ComplexField"):
    if a.grid != b.grid:
        raise GridMismatch(
            "Fields live on different grids",
            detail={"left": a.grid.metadata(), "right": b.grid.metadata()},
        )


class ComplexField:
    """Complex samples u_j ~ u(x_j) on a SpectralGrid."""

    __slots__ = ("grid", "values")
    # Make numpy defer to the reflected operators below (ndarray * field).
    __array_ufunc__ = None

    def __init__(self, grid: SpectralGrid, values: np.ndarray):
        values = np.asarray(values, dtype=complex)
        if values.shape != (grid.n,):
            raise GridMismatch(f"Expected {grid.n} samples, got shape {values.shape}")
        self.grid = grid
        self.values = values

    def __repr__(self):
        return f"ComplexField(n={self.grid.n}, L={self.grid.length:g}, norm={self.norm():.6g})"

    # Arithmetic

    def _other(self, other):
        if isinstance(other, ComplexField):
            _check_grids(self, other)
            return other.values
        return other

    def __add__(self, other):
        return ComplexField(self.grid, self.values + self._other(other))

    __radd__ = __add__

    def __sub__(self, other):
        return ComplexField(self.grid, self.values - self._other(other))

    def __rsub__(self, other):
        return ComplexField(self.grid, self._other(other) - self.values)

    def __mul__(self, other):
        return ComplexField(self.grid, self.values * self._other(other))

    __rmul__ = __mul__

    def __truediv__(self, scalar):
        return ComplexField(self.grid, self.values / scalar)

    def __neg__(self):
        return ComplexField(self.grid, -self.values)

    def conj(self) -> "ComplexField":
        return ComplexField(self.grid, np.conj(self.values))

    def copy(self) -> "ComplexField":
        return ComplexField(self.grid, self.values.copy())

    @property
    def real(self) -> np.ndarray:
        return self.values.real

    @property
    def imag(self) -> np.ndarray:
        return self.values.imag

    def is_finite(self) -> bool:
        return bool(np.all(np.isfinite(self.values)))

    # Spectral operations

    def spectrum(self) -> np.ndarray:
        return np.fft.fft(self.values)

    def derivative(self, order: int = 1) -> "ComplexField":
        """d^order/dx^order, spectral; odd orders drop the Nyquist mode."""
        if order == 0:
            return self.copy()
        k = self.grid.k_odd if order % 2 else self.grid.k
        return ComplexField(self.grid, np.fft.ifft((1j * k) ** order * self.spectrum()))

    def shift(self, a: float) -> "ComplexField":
        """x -> u(x - a) by the Fourier phase e^{-ika}."""
        if a == 0.0:
            return self.copy()
        return ComplexField(self.grid, np.fft.ifft(np.exp(-1j * self.grid.k * a) * self.spectrum()))

    def mirror(self) -> "ComplexField":
        """x -> u(-x)."""
        return ComplexField(self.grid, self.values[self.grid.mirror_index])

    # Norms

    def norm(self, sobolev_order: float = 0, weight_power: float = 0) -> float:
        return norms(self, sobolev_order, weight_power)

    def h1(self) -> float:
        return norms(self, 1, 0)

    def edge_ratio(self) -> float:
        """max(|u| at the two edge samples) / max|u|."""
        peak = np.max(np.abs(self.values))
        if peak == 0.0:
            return 0.0
        return float(max(abs(self.values[0]), abs(self.values[-1])) / peak)


@dataclass(frozen=True)
class SolitonParams:
    """(zeta, v, gamma, omega) plus the frequency-modulation amplitude f_omega."""

    zeta: float
    v: float
    gamma: float
    omega: float
    f_omega: float = 0.0

    def __post_init__(self):
        values = (self.zeta, self.v, self.gamma, self.omega, self.f_omega)
        if not all(np.isfinite(values)):
            raise ConfigError(f"Soliton parameters must be finite, got {values}")
        if not self.omega > 0:
            raise ConfigError(f"omega must be positive, got {self.omega}")

    def phase(self, x) -> np.ndarray:
        """alpha(x) = (v/2)(x - zeta/2) + gamma."""
        return 0.5 * self.v * (x - 0.5 * self.zeta) + self.gamma

    def as_dict(self) -> dict:
        return {
            "zeta": self.zeta,
            "v": self.v,
            "gamma": float(np.mod(self.gamma, 2.0 * np.pi)),
            "omega": self.omega,
            "f_omega": self.f_omega,
        }


Profile = Union[Callable[[np.ndarray], np.ndarray], ComplexField, np.ndarray]


def _check_wrap(values: np.ndarray, what: str, tolerance: Optional[float] = None):
    tolerance = settings.WRAP_TOLERANCE if tolerance is None else tolerance
    peak = np.max(np.abs(values))
    edge = max(abs(values[0]), abs(values[-1]))
    if peak > 0.0 and edge > tolerance * peak:
        raise WrapAround(
            f"{what}: edge amplitude {edge:.3e} exceeds {tolerance:g} of the peak {peak:.3e}",
            detail={"edge": float(edge), "peak": float(peak)},
        )


def place(
    profile: Profile,
    p: SolitonParams,
    grid: SpectralGrid,
    wrap_tolerance: Optional[float] = None,
) -> ComplexField:
    """
    Place a profile as e^{i(v/2)(x - zeta/2) + i gamma} f(x - zeta).

    Args:
        profile: Callable evaluated at x - zeta, or samples on the grid shifted spectrally
        p: Soliton parameters
        grid: Target grid
        wrap_tolerance: Edge-to-peak ratio allowed (settings.WRAP_TOLERANCE)

    Returns:
        The placed ComplexField
    """
    x = grid.x
    if callable(profile):
        shifted = np.asarray(profile(x - p.zeta), dtype=complex)
    else:
        samples = profile if isinstance(profile, ComplexField) else grid.field(profile)
        if samples.grid != grid:
            raise GridMismatch("Profile samples live on a different grid")
        shifted = samples.shift(p.zeta).values
    _check_wrap(shifted, f"place(zeta={p.zeta:g})", wrap_tolerance)
    return ComplexField(grid, np.exp(1j * p.phase(x)) * shifted)


def sym(f: ComplexField) -> ComplexField:
    """Sym(f)(x) = f(x) - f(-x)."""
    return f - f.mirror()


def mirror(f: ComplexField) -> ComplexField:
    return f.mirror()


def galilean(u: ComplexField, v: float, t: float) -> ComplexField:
    """u(x - vt) e^{i(vx/2 - v^2 t/4)}."""
    if v == 0.0:
        return u.copy()
    moved = u.shift(v * t)
    _check_wrap(moved.values, f"galilean(v={v:g}, t={t:g})")
    x = u.grid.x
    return moved * np.exp(1j * (0.5 * v * x - 0.25 * v * v * t))


def norms(u: ComplexField, sobolev_order: float = 0, weight_power: float = 0) -> float:
    """
    ||(1 + x^2)^{l/2} (1 - d^2)^{m/2} u||_{L^2}.

    Args:
        u: The field
        sobolev_order: m >= 0, applied through the multiplier (1 + k^2)^{m/2}
        weight_power: l >= 0

    Returns:
        The norm
    """
    if sobolev_order < 0 or weight_power < 0:
        raise ConfigError("Norm orders must be non-negative")
    grid = u.grid
    spectrum = u.spectrum()
    if sobolev_order:
        spectrum = spectrum * (1.0 + grid.k**2) ** (0.5 * sobolev_order)
    if weight_power == 0:
        return float(np.sqrt(np.sum(np.abs(spectrum) ** 2) * grid.dx / grid.n))
    values = np.fft.ifft(spectrum)
    weighted = (1.0 + grid.x**2) ** (0.5 * weight_power) * values
    return float(np.sqrt(np.sum(np.abs(weighted) ** 2) * grid.dx))


def physical_norm(u: ComplexField) -> float:
    """L^2 norm by physical-space quadrature."""
    return float(np.sqrt(np.sum(np.abs(u.values) ** 2) * u.grid.dx))


def inner(u: ComplexField, w: ComplexField) -> float:
    """<u, w> = Re sum u_j conj(w_j) dx."""
    _check_grids(u, w)
    return float(np.real(np.vdot(w.values, u.values)) * u.grid.dx)


def oddness_residual(u: ComplexField) -> float:
    """||u(x) + u(-x)|| / ||u||, zero for the zero field."""
    size = physical_norm(u)
    if size == 0.0:
        return 0.0
    return physical_norm(u + u.mirror()) / size
