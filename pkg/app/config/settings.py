"""Application configuration settings."""

from pydantic_settings import BaseSettings
from typing import Any, Dict, Literal, Mapping

from app.core.errors import ConfigError


class Settings(BaseSettings):
    """Lab settings loaded from environment variables."""

    # Application Configuration
    APP_NAME: str = "Soliton Collision Lab"
    VERSION: str = "1.0.0"
    DEBUG: bool = False
    PORT: int = 3100
    LOG_LEVEL: str = "INFO"

    # CORS Configuration
    CORS_ORIGINS: str = "*"

    # Run Configuration
    OUTPUT_DIR: str = "runs"
    MAX_WORKERS: int = 4
    SEED: int = 1234

    # Existence check (root of T_omega)
    ROOT_SCAN_POINTS: int = 10_000
    ROOT_XTOL: float = 1e-14
    ROOT_SLOPE_TOL: float = 1e-10

    # Profile integration
    PROFILE_RTOL: float = 1e-13
    PROFILE_ATOL: float = 1e-15
    PROFILE_POINTS: int = 4097
    PROFILE_HALF_LENGTH: float = 40.0  # in units of 1/sqrt(omega)
    PROFILE_TAIL_RATIO: float = 1e-12
    RADICAND_TOL: float = 1e-10
    D_OMEGA_STEP: float = 1e-4  # relative to omega
    RICHARDSON_TOL: float = 1e-3
    TAIL_FIT_LOW: float = 1e-10
    TAIL_FIT_HIGH: float = 1e-3  # relative to y0
    TAIL_FIT_TOL: float = 1e-4
    TAIL_FIT_MIN_POINTS: int = 5

    # Spectral grid
    GRID_N: int = 2048
    GRID_LENGTH: float = 80.0
    WRAP_TOLERANCE: float = 1e-10

    # Linearized operator
    GRAM_CONDITION_MAX: float = 1e6
    ORTHOGONALITY_TOL: float = 1e-8
    INVERSION_RTOL: float = 1e-8
    SOLVER_RTOL: float = 1e-12
    SOLVER_MAX_ITER: int = 2000
    DENSE_FALLBACK_MAX_N: int = 4096
    DENSE_EIGEN_MAX_N: int = 1024
    EIGEN_TOL: float = 1e-8
    EIGEN_MAX_ITER: int = 500

    # Time integration
    DT: float = 1e-3
    SNAPSHOT_STRIDE: int = 250
    SCHEME: Literal["strang", "yoshida4"] = "strang"
    ODDNESS_TOL: float = 1e-8  # relative, for half-line quantities

    # Ansatz and refinement
    CORRECTION_VARIANT: Literal["displayed", "balanced"] = "balanced"
    CROSS_CHECK_TOL: float = 1e-5
    REFINE_DT_FRACTION: float = 0.05
    SEPARATION_RTOL: float = 1e-12

    # Modulation fit
    FIT_TOL: float = 1e-10
    FIT_MAX_ITER: int = 50
    FIT_BASIN: float = 0.1
    FIT_MIN_SEPARATION: float = 5.0  # in units of 1/sqrt(omega)
    RATE_TOLERANCE: float = 10.0

    # Collision experiments
    SEPARATION_FACTOR: float = 1e-3  # e^{-2 sqrt(omega) d} <= factor * v^2
    OUTGOING_WINDOW: float = 10.0  # in units of 1/v
    ORBITAL_BOUND_FACTOR: float = 10.0

    class Config:
        env_file = ".env"
        case_sensitive = True
        extra = "ignore"  # Ignore extra fields in .env file


# Global settings instance
settings = Settings()


def apply_overrides(overrides: Mapping[str, Any]) -> Dict[str, Any]:
    """
    Validate KEY=VALUE overrides and apply them to the global settings.

    Args:
        overrides: Mapping of setting names to raw values

    Returns:
        The validated values that were applied
    """
    unknown = [key for key in overrides if key not in Settings.model_fields]
    if unknown:
        raise ConfigError(f"Unknown setting(s): {', '.join(sorted(unknown))}", detail={"unknown": unknown})

    merged = {**settings.model_dump(), **overrides}
    try:
        validated = Settings.model_validate(merged)
    except ValueError as e:
        raise ConfigError(f"Invalid setting override: {e}") from e

    applied = {}
    for key in overrides:
        value = getattr(validated, key)
        setattr(settings, key, value)
        applied[key] = value
    return applied
