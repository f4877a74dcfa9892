"""API routes configuration."""

from fastapi import APIRouter
from app.api.endpoints import (
    profile,
    linop_check,
    evolve_stream,
    ansatz_residual,
    collide,
    sweep,
    orbital,
    fit,
    runs,
)

# Create main API router
api_router = APIRouter()

# Include endpoint routers
api_router.include_router(
    profile.router,
    tags=["Ground States"]
)

api_router.include_router(
    linop_check.router,
    tags=["Ground States"]
)

api_router.include_router(
    evolve_stream.router,
    tags=["Evolution"]
)

api_router.include_router(
    ansatz_residual.router,
    tags=["Ansatz"]
)

api_router.include_router(
    collide.router,
    tags=["Collisions"]
)

api_router.include_router(
    sweep.router,
    tags=["Collisions"]
)

api_router.include_router(
    orbital.router,
    tags=["Collisions"]
)

api_router.include_router(
    fit.router,
    tags=["Modulation"]
)

api_router.include_router(
    runs.router,
    tags=["Runs"]
)
