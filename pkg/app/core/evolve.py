"""Split-step Fourier integration of i u_t + u_xx + F'(|u|^2) u = 0.

Also computes the conserved quantities H, Q, M and their half-line versions.
"""

import logging
from dataclasses import dataclass, field
from typing import Callable, Dict, Iterator, List, Literal, Mapping, Optional, Sequence, Tuple

import numpy as np

from app.config.settings import settings
from app.core.errors import ConfigError, NonFinite, NotOdd
from app.core.field import ComplexField, SpectralGrid, oddness_residual, physical_norm
from app.core.nonlinearity import PolynomialNonlinearity

logger = logging.getLogger(__name__)

Scheme = Literal["strang", "yoshida4"]

# Yoshida triple jump weights
_W1 = 1.0 / (2.0 - 2.0 ** (1.0 / 3.0))
_W0 = 1.0 - 2.0 * _W1


@dataclass(frozen=True)
class EvolutionConfig:
    """Fixed-step time span. A negative dt runs backward from t_begin."""

    t_end: float
    t_begin: float = 0.0
    dt: float = field(default_factory=lambda: settings.DT)
    snapshot_stride: int = field(default_factory=lambda: settings.SNAPSHOT_STRIDE)
    scheme: Scheme = field(default_factory=lambda: settings.SCHEME)

    def __post_init__(self):
        if not (np.isfinite(self.dt) and self.dt != 0.0):
            raise ConfigError(f"dt must be finite and nonzero, got {self.dt}")
        span = self.t_end - self.t_begin
        if span * self.dt < 0.0:
            raise ConfigError(f"dt={self.dt} points away from t_end={self.t_end} (t_begin={self.t_begin})")
        if self.snapshot_stride < 1:
            raise ConfigError(f"snapshot_stride must be >= 1, got {self.snapshot_stride}")
        if self.scheme not in ("strang", "yoshida4"):
            raise ConfigError(f"Unknown scheme '{self.scheme}'")

    @property
    def n_steps(self) -> int:
        return int(round((self.t_end - self.t_begin) / self.dt))

    def check_grid(self, grid: SpectralGrid):
        """Warn when dt * max k^2 exceeds pi; the linear step stays exact either way."""
        phase = abs(self.dt) * grid.k_max**2
        if phase > np.pi:
            logger.warning(f"dt*max(k^2) = {phase:.3g} > pi on n={grid.n}, L={grid.length:g}; splitting error grows")


class SplitStepIntegrator:
    """Strang splitting N(h/2) L(h) N(h/2), optionally composed into a fourth-order triple jump."""

    def __init__(self, grid: SpectralGrid, F: PolynomialNonlinearity, dt: float, scheme: Scheme = "strang"):
        self.grid = grid
        self.F = F
        self.dt = float(dt)
        self.scheme = scheme
        weights = (1.0,) if scheme == "strang" else (_W1, _W0, _W1)
        self.substeps = [w * self.dt for w in weights]
        self.linear = [np.exp(-1j * grid.k**2 * h) for h in self.substeps]

    def _nonlinear(self, values: np.ndarray, h: float) -> np.ndarray:
        return values * np.exp(1j * h * self.F.dF(np.abs(values) ** 2))

    def _strang(self, values: np.ndarray, h: float, multiplier: np.ndarray) -> np.ndarray:
        values = self._nonlinear(values, 0.5 * h)
        values = np.fft.ifft(multiplier * np.fft.fft(values))
        return self._nonlinear(values, 0.5 * h)

    def advance(self, values: np.ndarray) -> np.ndarray:
        for h, multiplier in zip(self.substeps, self.linear):
            values = self._strang(values, h, multiplier)
        return values

    def step(self, u: ComplexField) -> ComplexField:
        values = self.advance(u.values)
        if not np.all(np.isfinite(values)):
            raise NonFinite("Split step produced non-finite samples")
        return ComplexField(u.grid, values)


def step(u: ComplexField, dt: float, F: PolynomialNonlinearity, scheme: Scheme = "strang") -> ComplexField:
    """One split step of size dt."""
    return SplitStepIntegrator(u.grid, F, dt, scheme).step(u)


# Conserved quantities


@dataclass(frozen=True)
class ConservedQuantities:
    H: float
    Q: float
    M: float

    def as_dict(self) -> Dict[str, float]:
        return {"H": self.H, "Q": self.Q, "M": self.M}


@dataclass(frozen=True)
class HalfLineQuantities:
    Q_plus: float
    H_plus: float
    M_plus: float
    boundary_flux: float
    momentum_rate: float

    def as_dict(self) -> Dict[str, float]:
        return {
            "Q_plus": self.Q_plus,
            "H_plus": self.H_plus,
            "M_plus": self.M_plus,
            "flux": self.boundary_flux,
            "momentum_rate": self.momentum_rate,
        }


def _densities(u: ComplexField, F: PolynomialNonlinearity) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    ux = u.derivative(1).values
    mass = np.abs(u.values) ** 2
    energy = 0.5 * np.abs(ux) ** 2 - 0.5 * F.F(mass)
    momentum = np.imag(np.conj(u.values) * ux)
    return mass, energy, momentum, ux


def conserved(u: ComplexField, F: PolynomialNonlinearity) -> ConservedQuantities:
    """H = int |u_x|^2/2 - F(|u|^2)/2, Q = int |u|^2, M = Im int conj(u) u_x."""
    mass, energy, momentum, _ = _densities(u, F)
    dx = u.grid.dx
    return ConservedQuantities(H=float(np.sum(energy) * dx), Q=float(np.sum(mass) * dx), M=float(np.sum(momentum) * dx))


def half_line_weights(grid: SpectralGrid) -> np.ndarray:
    """Trapezoid weights for (0, L/2]: 1 inside, 1/2 at x = 0 and at the periodic edge."""
    weights = (grid.x > 0.0).astype(float)
    weights[grid.n // 2] = 0.5
    weights[0] = 0.5
    return weights


def half_quantities(u: ComplexField, F: PolynomialNonlinearity, check_odd: bool = True) -> HalfLineQuantities:
    """
    Mass, energy and momentum on x > 0 plus the momentum flux through x = 0.

    Raises:
        NotOdd: when ||u(x) + u(-x)|| exceeds ODDNESS_TOL ||u||
    """
    if check_odd:
        residual = oddness_residual(u)
        if residual > settings.ODDNESS_TOL:
            raise NotOdd(f"Half-line quantities need an odd field; oddness residual {residual:.3e}")
    mass, energy, momentum, ux = _densities(u, F)
    weights = half_line_weights(u.grid) * u.grid.dx
    slope = abs(ux[u.grid.n // 2]) ** 2
    return HalfLineQuantities(
        Q_plus=float(np.dot(weights, mass)),
        H_plus=float(np.dot(weights, energy)),
        M_plus=float(np.dot(weights, momentum)),
        boundary_flux=0.5 * float(slope),
        momentum_rate=float(slope),
    )


def observer_row(t: float, u: ComplexField, F: PolynomialNonlinearity) -> Dict[str, float]:
    """(t, H, Q, M, Q+, M+, flux, oddness_residual) for the observer CSV."""
    q = conserved(u, F)
    half = half_quantities(u, F, check_odd=False)
    return {
        "t": float(t),
        "H": q.H,
        "Q": q.Q,
        "M": q.M,
        "Q_plus": half.Q_plus,
        "M_plus": half.M_plus,
        "flux": half.boundary_flux,
        "oddness_residual": oddness_residual(u),
    }


# Runs

Observer = Callable[[float, ComplexField], Mapping[str, float]]


@dataclass
class Trajectory:
    times: List[float] = field(default_factory=list)
    snapshots: List[ComplexField] = field(default_factory=list)
    observations: Dict[str, List[Mapping[str, float]]] = field(default_factory=dict)

    @property
    def final(self) -> Optional[ComplexField]:
        return self.snapshots[-1] if self.snapshots else None

    def series(self, observer: str, key: str) -> np.ndarray:
        return np.array([row[key] for row in self.observations.get(observer, [])])


def iterate(
    u0: ComplexField,
    config: EvolutionConfig,
    F: PolynomialNonlinearity,
) -> Iterator[Tuple[float, ComplexField]]:
    """Yield (t, u) at t_begin and after every snapshot_stride steps (and at t_end)."""
    config.check_grid(u0.grid)
    integrator = SplitStepIntegrator(u0.grid, F, config.dt, config.scheme)
    n_steps = config.n_steps
    values = u0.values.copy()
    yield config.t_begin, u0.copy()
    for i in range(1, n_steps + 1):
        values = integrator.advance(values)
        if i % config.snapshot_stride == 0 or i == n_steps:
            t = config.t_begin + i * config.dt
            if not np.all(np.isfinite(values)):
                raise NonFinite(f"Non-finite samples at t={t:.6g} (step {i})", detail={"t": t, "step": i})
            yield t, ComplexField(u0.grid, values.copy())


def run(
    u0: ComplexField,
    config: EvolutionConfig,
    F: PolynomialNonlinearity,
    observers: Optional[Mapping[str, Observer]] = None,
    keep_snapshots: bool = True,
    callback: Optional[Callable[[float, ComplexField], None]] = None,
) -> Trajectory:
    """
    Fixed-step loop with observers every snapshot_stride steps.

    Args:
        u0: Initial field
        config: Time span and scheme
        F: The nonlinearity
        observers: Named callables (t, u) -> row
        keep_snapshots: Keep every snapshot (the last one is always kept)
        callback: Called with (t, u) at every snapshot

    Returns:
        Trajectory with times, snapshots and observer rows

    Raises:
        NonFinite: with the partial trajectory attached
    """
    observers = observers or {}
    trajectory = Trajectory(observations={name: [] for name in observers})
    n_steps = max(config.n_steps, 1)
    report_every = max(1, n_steps // 10)
    logger.info(
        f"Evolving {config.n_steps} steps of dt={config.dt:g} ({config.scheme}) "
        f"from t={config.t_begin:g} to t={config.t_end:g}"
    )
    last_report = 0
    try:
        for t, u in iterate(u0, config, F):
            trajectory.times.append(t)
            if keep_snapshots or not trajectory.snapshots:
                trajectory.snapshots.append(u)
            else:
                trajectory.snapshots[-1] = u
            for name, observer in observers.items():
                trajectory.observations[name].append(dict(observer(t, u)))
            if callback is not None:
                callback(t, u)
            done = int(round((t - config.t_begin) / config.dt))
            if done - last_report >= report_every:
                logger.info(f"Step {done}/{config.n_steps} (t={t:.4g})")
                last_report = done
    except NonFinite as e:
        e.trajectory = trajectory
        logger.error(f"Evolution aborted: {e.message}")
        raise
    return trajectory


def drift(series: Sequence[ConservedQuantities]) -> Dict[str, float]:
    """Largest absolute and relative drift of H, Q, M against the first entry."""
    if not series:
        return {}
    reference = series[0]
    out = {}
    for key in ("H", "Q", "M"):
        values = np.array([getattr(q, key) for q in series])
        absolute = float(np.max(np.abs(values - getattr(reference, key))))
        scale = abs(getattr(reference, key))
        out[f"{key}_abs"] = absolute
        out[f"{key}_rel"] = absolute / scale if scale > 0.0 else absolute
    return out


def center_of_mass(u: ComplexField, half_line: bool = False) -> float:
    """int x |u|^2 / int |u|^2, optionally restricted to x > 0."""
    density = np.abs(u.values) ** 2
    if half_line:
        density = density * half_line_weights(u.grid)
    total = np.sum(density)
    if total == 0.0:
        return 0.0
    return float(np.sum(u.grid.x * density) / total)


def shape_error(u: ComplexField, reference: ComplexField) -> float:
    """sup | |u| - |reference| |."""
    return float(np.max(np.abs(np.abs(u.values) - np.abs(reference.values))))


def relative_distance(u: ComplexField, w: ComplexField) -> float:
    size = physical_norm(w)
    return physical_norm(u - w) / size if size else physical_norm(u)
