"""
Subcommand runners shared by the CLI and the HTTP endpoints.

Each runner takes a validated config model and returns a CommandResult that
knows how to write itself into an output directory.
"""

import logging
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any, Callable, Dict, Iterator, List, Optional, Tuple, Type

from pydantic import BaseModel

from app.core import evolve
from app.core.ansatz import InteractionDynamics, SingleSoliton, interaction_constant, interaction_routes
from app.core.errors import ConfigError
from app.core.evolve import EvolutionConfig
from app.core.experiments import orbital_window, prepare, residual_scaling, run_collision, sweep
from app.core.field import ComplexField, SolitonParams
from app.core.linop import LinearizedOperator, diagnostics
from app.core.modulation import ModulationModel, fit, lyapunov, remainder
from app.core.nonlinearity import check_existence
from app.core.profile import SolitonProfile, solve_profile, stability_margin
from app.models.lab_config import (
    CollisionConfig,
    EvolveConfig,
    FitConfig,
    LinopCheckConfig,
    OrbitalConfig,
    ProfileConfig,
    ResidualConfig,
    SweepConfig,
    TimeSpec,
)
from app.utils.output_writer import read_snapshot, write_csv, write_json, write_profile, write_snapshot

logger = logging.getLogger(__name__)


@dataclass
class CommandResult:
    """Summary plus the tables, profiles and snapshots a subcommand produced."""

    command: str
    summary: Dict[str, Any]
    tables: Dict[str, List[Dict[str, Any]]] = field(default_factory=dict)
    profiles: Dict[str, SolitonProfile] = field(default_factory=dict)
    snapshots: Dict[str, Tuple[ComplexField, float]] = field(default_factory=dict)

    def write(self, directory: Path) -> List[Path]:
        directory = Path(directory)
        paths = [write_json(directory / "report.json", self.summary)]
        for name, rows in self.tables.items():
            paths.append(write_csv(directory / f"{name}.csv", rows))
        for name, profile in self.profiles.items():
            paths.extend(write_profile(directory, profile, stem=name))
        for name, (u, t) in self.snapshots.items():
            paths.append(write_snapshot(directory / f"{name}.csv", u, t))
        return paths


# profile


def run_profile(config: ProfileConfig) -> CommandResult:
    F = config.nonlinearity.build()
    existence = check_existence(F, config.omega)
    if not existence.satisfied:
        raise ConfigError(
            f"No ground state for omega={config.omega:g}: {existence.reason}",
            detail={"omega": config.omega, "reason": existence.reason},
        )
    profile = solve_profile(F, config.omega, half_length=config.half_length, n=config.n)
    summary = {
        **profile.metadata(),
        "decay_rate": profile.decay_rate,
        "stability_margin": stability_margin(F, config.omega),
        "nonlinearity": F.to_pairs(),
    }
    return CommandResult("profile", summary, profiles={"profile": profile})


# linop-check


def run_linop_check(config: LinopCheckConfig) -> CommandResult:
    F = config.nonlinearity.build()
    profile = solve_profile(F, config.omega)
    S = LinearizedOperator(profile, config.grid.build())
    summary = diagnostics(S).to_dict()
    routes = interaction_routes(profile)
    summary["interaction"] = {**routes, "C": interaction_constant(profile)}
    return CommandResult("linop-check", summary)


# evolve


@dataclass
class EvolveSetup:
    """Initial data, time stepping and the observer for one evolve run."""

    u0: ComplexField
    time: EvolutionConfig
    F: Any
    observe: Callable[[float, ComplexField], Dict[str, float]]
    reference: Optional[SingleSoliton] = None


def _single_soliton_observer(F, exact: SingleSoliton):
    def observe(t: float, u: ComplexField) -> Dict[str, float]:
        row = evolve.observer_row(t, u, F)
        row["center"] = evolve.center_of_mass(u)
        row["center_error"] = abs(row["center"] - exact.params(t).zeta)
        row["shape_error"] = evolve.shape_error(u, exact.field(t))
        return row

    return observe


def _collision_observer(F):
    def observe(t: float, u: ComplexField) -> Dict[str, float]:
        row = evolve.observer_row(t, u, F)
        row["center"] = evolve.center_of_mass(u, half_line=True)
        return row

    return observe


def evolve_setup(config: EvolveConfig) -> EvolveSetup:
    F = config.nonlinearity.build()
    time = config.time
    if config.initial == "collision":
        # the single-soliton window and grid defaults do not apply to collision data
        explicit = config.model_fields_set
        collision = CollisionConfig(
            nonlinearity=config.nonlinearity,
            omega=config.omega,
            v=config.v,
            order=config.order,
            grid=config.grid if "grid" in explicit else None,
            time=time if "time" in explicit else TimeSpec(),
        )
        prepared = prepare(collision)
        step = EvolutionConfig(
            t_end=prepared.t_end, t_begin=prepared.t_start, dt=time.dt,
            snapshot_stride=time.snapshot_stride, scheme=time.scheme,
        )
        return EvolveSetup(u0=prepared.u0, time=step, F=F, observe=_collision_observer(F))

    profile = solve_profile(F, config.omega)
    grid = config.grid.build()
    exact = SingleSoliton(profile, config.v, grid, zeta0=config.zeta0)
    t_begin = time.t_start if time.t_start is not None else 0.0
    t_end = time.t_end if time.t_end is not None else 50.0
    step = EvolutionConfig(
        t_end=t_end, t_begin=t_begin, dt=time.dt, snapshot_stride=time.snapshot_stride, scheme=time.scheme
    )
    return EvolveSetup(
        u0=exact.field(t_begin), time=step, F=F, observe=_single_soliton_observer(F, exact), reference=exact
    )


def stream_evolve(setup: EvolveSetup) -> Iterator[Dict[str, float]]:
    """Observer rows one snapshot at a time."""
    for t, u in evolve.iterate(setup.u0, setup.time, setup.F):
        yield setup.observe(t, u)


def run_evolve(config: EvolveConfig) -> CommandResult:
    setup = evolve_setup(config)
    trajectory = evolve.run(
        setup.u0, setup.time, setup.F, observers={"observers": setup.observe}, keep_snapshots=config.save_snapshots
    )
    rows = trajectory.observations["observers"]
    series = [evolve.ConservedQuantities(H=r["H"], Q=r["Q"], M=r["M"]) for r in rows]
    summary: Dict[str, Any] = {
        "initial": config.initial,
        "t_begin": setup.time.t_begin,
        "t_end": setup.time.t_end,
        "steps": setup.time.n_steps,
        "drift": evolve.drift(series),
        "max_oddness": max(r["oddness_residual"] for r in rows) if config.initial == "collision" else None,
    }
    if setup.reference is not None:
        summary["max_center_error"] = max(r["center_error"] for r in rows)
        summary["max_shape_error"] = max(r["shape_error"] for r in rows)

    snapshots = {}
    if config.save_snapshots:
        for i, (t, u) in enumerate(zip(trajectory.times, trajectory.snapshots)):
            snapshots[f"snapshot_{i:05d}"] = (u, t)
    else:
        snapshots["final"] = (trajectory.final, trajectory.times[-1])
    return CommandResult("evolve", summary, tables={"observers": rows}, snapshots=snapshots)


# ansatz-residual


def run_ansatz_residual(config: ResidualConfig) -> CommandResult:
    F = config.nonlinearity.build()
    results = residual_scaling(
        F, config.omega, sorted(config.v_list), orders=config.orders,
        grid=config.grid.build(), t=config.t, variant=config.variant,
    )
    rows = [row for scaling in results.values() for row in scaling.rows()]
    summary = {
        "slopes": {
            order: {"slope": s.slope, "stderr": s.stderr, "variant": s.variant} for order, s in results.items()
        },
        "t": config.t,
        "v_list": sorted(config.v_list),
    }
    return CommandResult("ansatz-residual", summary, tables={"residuals": rows})


# collide / sweep / orbital


def run_collide(config: CollisionConfig) -> CommandResult:
    last: Dict[str, Any] = {}

    def keep_last(t: float, u: ComplexField):
        last["u"], last["t"] = u, t

    report = run_collision(config, callback=keep_last)
    tables = {"observers": report.observations, "modulation": report.modulation}
    snapshots = {"final": (last["u"], last["t"])} if last else {}
    return CommandResult("collide", report.summary(), tables=tables, snapshots=snapshots)


def run_sweep(config: SweepConfig) -> CommandResult:
    result = sweep(config)
    summary = {
        "v_list": result.v_list,
        "inelasticity_list": result.inelasticity_list,
        "corrected_list": result.corrected_list,
        "residual_list": result.residual_list,
        "fitted_slope": result.fitted_slope,
        "confidence": result.confidence,
        "remainder_slope": result.remainder_slope,
        "remainder_confidence": result.remainder_confidence,
        "noise_floor": result.noise_floor,
        "noise_limited": result.noise_limited,
        "failures": result.failures,
        "reports": result.reports,
    }
    return CommandResult("sweep", summary, tables={"sweep": result.rows()})


def run_orbital(config: OrbitalConfig) -> CommandResult:
    report = orbital_window(config)
    return CommandResult("orbital", report.summary(), tables={"modulation": report.rows})


# fit


def run_fit(config: FitConfig) -> CommandResult:
    F = config.nonlinearity.build()
    profile = solve_profile(F, config.omega)
    dyn = InteractionDynamics(C=interaction_constant(profile), omega=config.omega, v=config.v)

    if config.snapshot:
        path = Path(config.snapshot)
        if not path.is_file():
            raise ConfigError(f"Snapshot {path} does not exist")
        try:
            u, t = read_snapshot(path)
        except (ValueError, KeyError) as e:
            raise ConfigError(f"Cannot read snapshot {path}: {e}") from e
    else:
        t = config.t
        u = None

    d, d_dot, _ = (float(q) for q in dyn.separation(t))
    base = SolitonParams(zeta=d, v=d_dot, gamma=config.omega * t, omega=config.omega)
    if u is None:
        grid = config.grid.build()
        moved = SolitonParams(
            zeta=d + config.zeta_offset, v=d_dot, gamma=base.gamma + config.phase_offset, omega=config.omega
        )
        u = ModulationModel(profile, grid).field(moved)

    state = fit(u, base, profile, t=t)
    r = remainder(u, state, profile)
    diagnostics_row = lyapunov(r, state, profile, F, d_dot=d_dot).as_row()
    p_zeta, p_v, p_gamma, p_omega = state.shifts
    summary = {
        "t": t,
        "reference": base.as_dict(),
        "fitted": state.params.as_dict(),
        "shifts": {"zeta": p_zeta, "v": p_v, "gamma": p_gamma, "omega": p_omega},
        "iterations": state.iterations,
        "residual": state.residual_norm,
        "remainder_H1": state.remainder_h1,
        "lyapunov": diagnostics_row,
    }
    if not config.snapshot:
        summary["expected_shifts"] = {"zeta": config.zeta_offset, "gamma": float(config.phase_offset)}
    return CommandResult("fit", summary, tables={"fit": [{**state.as_row(), **diagnostics_row}]})


@dataclass(frozen=True)
class Command:
    config_model: Type[BaseModel]
    runner: Callable[[Any], CommandResult]
    help: str


COMMANDS: Dict[str, Command] = {
    "profile": Command(ProfileConfig, run_profile, "Solve the ground-state profile"),
    "linop-check": Command(LinopCheckConfig, run_linop_check, "Kernel identities and coercivity of S"),
    "evolve": Command(EvolveConfig, run_evolve, "Evolve a single soliton or prepared collision data"),
    "ansatz-residual": Command(ResidualConfig, run_ansatz_residual, "Residual norms of the ansatz against v"),
    "collide": Command(CollisionConfig, run_collide, "One symmetric collision"),
    "sweep": Command(SweepConfig, run_sweep, "Collisions over a list of speeds"),
    "orbital": Command(OrbitalConfig, run_orbital, "Receding solitons with an odd perturbation"),
    "fit": Command(FitConfig, run_fit, "Modulation fit of a snapshot or a shifted ansatz"),
}


def execute(name: str, config: BaseModel) -> CommandResult:
    if name not in COMMANDS:
        raise ConfigError(f"Unknown command '{name}'", detail={"commands": sorted(COMMANDS)})
    logger.info(f"Running {name}")
    result = COMMANDS[name].runner(config)
    logger.info(f"Finished {name}")
    return result
