"""Experiment configuration models, parsed from JSON config files or request bodies."""

from typing import List, Literal, Optional, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field, field_validator, model_validator

from app.config.settings import settings
from app.core.field import SpectralGrid
from app.core.nonlinearity import PolynomialNonlinearity


class NonlinearitySpec(BaseModel):
    """F'(s) as a preset or as (power, coefficient) pairs of F."""

    kind: Literal["cubic", "cubic_quintic", "triple_power", "pairs"] = "cubic"
    a: float = Field(2.0, description="Coefficient of s in F'(s)")
    b: float = Field(0.0, description="Coefficient of s^2 in F'(s)")
    c: float = Field(0.0, description="Coefficient of s^3 in F'(s)")
    pairs: Optional[List[Tuple[int, float]]] = Field(None, description="(power, coefficient) pairs of F(s)")

    @model_validator(mode="after")
    def _pairs_given(self):
        if self.kind == "pairs" and not self.pairs:
            raise ValueError("kind 'pairs' needs a non-empty 'pairs' list")
        return self

    def build(self) -> PolynomialNonlinearity:
        if self.kind == "cubic":
            return PolynomialNonlinearity.cubic()
        if self.kind == "cubic_quintic":
            return PolynomialNonlinearity.cubic_quintic(self.a, self.b)
        if self.kind == "triple_power":
            return PolynomialNonlinearity.triple_power(self.a, self.b, self.c)
        return PolynomialNonlinearity.from_pairs(self.pairs)


class GridSpec(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    n: int = Field(default_factory=lambda: settings.GRID_N, description="Number of grid points (power of two)")
    length: float = Field(default_factory=lambda: settings.GRID_LENGTH, alias="L", description="Period L")

    def build(self) -> SpectralGrid:
        return SpectralGrid(self.n, self.length)


class TimeSpec(BaseModel):
    dt: float = Field(default_factory=lambda: settings.DT)
    t_start: Optional[float] = Field(None, description="Start time; derived from the separation criterion when omitted")
    t_end: Optional[float] = Field(None, description="End time; -t_start when omitted")
    snapshot_stride: int = Field(default_factory=lambda: settings.SNAPSHOT_STRIDE, ge=1)
    scheme: Literal["strang", "yoshida4"] = Field(default_factory=lambda: settings.SCHEME)

    @field_validator("dt")
    @classmethod
    def _positive_dt(cls, value: float) -> float:
        if not value > 0:
            raise ValueError("dt must be positive")
        return value


class CollisionConfig(BaseModel):
    """One symmetric collision of two equal solitons."""

    nonlinearity: NonlinearitySpec = Field(default_factory=NonlinearitySpec)
    omega: float = Field(1.0, gt=0)
    v: float = Field(0.2, gt=0, lt=1, description="Incoming half-speed")
    order: Literal[0, 1] = Field(1, description="Ansatz order of the prepared data")
    variant: Optional[Literal["displayed", "balanced"]] = None
    grid: Optional[GridSpec] = Field(None, description="Derived from the initial separation when omitted")
    time: TimeSpec = Field(default_factory=TimeSpec)
    check_reversal: bool = Field(False, description="Also integrate back from the final state")
    seed: int = Field(default_factory=lambda: settings.SEED)


class SweepConfig(CollisionConfig):
    v_list: List[float] = Field(..., min_length=3)
    noise_floor: Optional[float] = Field(None, ge=0, description="Inelasticity noise floor; estimated when omitted")
    estimate_noise_floor: bool = True
    max_workers: Optional[int] = Field(None, ge=1)

    @field_validator("v_list")
    @classmethod
    def _speeds(cls, value: List[float]) -> List[float]:
        if any(not 0 < v < 1 for v in value):
            raise ValueError("every speed must lie in (0, 1)")
        return sorted(value)

    def at_speed(self, v: float) -> CollisionConfig:
        data = self.model_dump(include=set(CollisionConfig.model_fields), by_alias=True)
        data["v"] = v
        return CollisionConfig.model_validate(data)


class OrbitalConfig(BaseModel):
    """Receding solitons plus a small odd perturbation."""

    nonlinearity: NonlinearitySpec = Field(default_factory=NonlinearitySpec)
    omega: float = Field(1.0, gt=0)
    v: float = Field(0.1, gt=0, lt=1)
    perturbation: float = Field(1e-6, ge=0, description="H1 size of the odd perturbation")
    zeta0: Optional[float] = Field(None, gt=0, description="Initial half-separation; (16/sqrt(omega)) ln(1/v) when omitted")
    window: Optional[float] = Field(None, gt=0, description="Evolution time; 20/v when omitted")
    grid: Optional[GridSpec] = None
    time: TimeSpec = Field(default_factory=TimeSpec)
    seed: int = Field(default_factory=lambda: settings.SEED)

    def initial_separation(self) -> float:
        if self.zeta0 is not None:
            return self.zeta0
        return float(16.0 / np.sqrt(self.omega) * np.log(1.0 / self.v))

    def duration(self) -> float:
        return self.window if self.window is not None else 20.0 / self.v


class ProfileConfig(BaseModel):
    nonlinearity: NonlinearitySpec = Field(default_factory=NonlinearitySpec)
    omega: float = Field(1.0, gt=0)
    half_length: Optional[float] = Field(None, gt=0, description="Half width of the sample window")
    n: Optional[int] = Field(None, ge=512, description="Number of profile samples")


class LinopCheckConfig(BaseModel):
    nonlinearity: NonlinearitySpec = Field(default_factory=NonlinearitySpec)
    omega: float = Field(1.0, gt=0)
    grid: GridSpec = Field(default_factory=GridSpec)
    seed: int = Field(default_factory=lambda: settings.SEED)


class EvolveConfig(BaseModel):
    """A single boosted soliton or prepared collision data evolved with observers."""

    nonlinearity: NonlinearitySpec = Field(default_factory=NonlinearitySpec)
    omega: float = Field(1.0, gt=0)
    v: float = Field(0.2, gt=0, lt=1)
    initial: Literal["single", "collision"] = "single"
    order: Literal[0, 1] = 0
    zeta0: float = Field(0.0, description="Initial centre of the single soliton")
    grid: GridSpec = Field(default_factory=GridSpec)
    time: TimeSpec = Field(default_factory=lambda: TimeSpec(t_start=0.0, t_end=50.0))
    save_snapshots: bool = Field(False, description="Write every snapshot, not only the last")


class ResidualConfig(BaseModel):
    nonlinearity: NonlinearitySpec = Field(default_factory=NonlinearitySpec)
    omega: float = Field(1.0, gt=0)
    v_list: List[float] = Field(default_factory=lambda: [0.05, 0.1, 0.2, 0.3], min_length=2)
    orders: List[Literal[0, 1, "refined"]] = Field(default_factory=lambda: [0, 1, "refined"])
    t: float = 0.0
    variant: Optional[Literal["displayed", "balanced"]] = None
    grid: GridSpec = Field(default_factory=GridSpec)


class FitConfig(BaseModel):
    """Fit a snapshot file, or the order-0 ansatz with a known centre offset when no snapshot is given."""

    nonlinearity: NonlinearitySpec = Field(default_factory=NonlinearitySpec)
    omega: float = Field(1.0, gt=0)
    v: float = Field(0.2, gt=0, lt=1)
    t: float = Field(-20.0, description="Time of the ansatz used as reference")
    snapshot: Optional[str] = Field(None, description="Snapshot CSV written by evolve or collide")
    zeta_offset: float = Field(0.0, description="Centre offset applied to the generated field")
    phase_offset: float = Field(0.0, description="Phase applied to the generated field")
    grid: GridSpec = Field(default_factory=GridSpec)
