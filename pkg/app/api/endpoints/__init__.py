"""API endpoints package."""

__all__ = [
    "profile",
    "linop_check",
    "evolve_stream",
    "ansatz_residual",
    "collide",
    "sweep",
    "orbital",
    "fit",
    "runs",
]
