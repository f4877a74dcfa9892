"""FastAPI service for the soliton collision lab."""

import logging
from contextlib import asynccontextmanager
from pathlib import Path

from fastapi import FastAPI, Request
from fastapi.middleware.cors import CORSMiddleware
from fastapi.responses import JSONResponse

from app.api.routes import api_router
from app.config.settings import settings
from app.core.errors import SolitonLabError
from app.models.run_manifest import run_registry

logger = logging.getLogger(__name__)


@asynccontextmanager
async def lifespan(app: FastAPI):
    output_dir = Path(settings.OUTPUT_DIR)
    output_dir.mkdir(parents=True, exist_ok=True)
    logger.info(f"{settings.APP_NAME} v{settings.VERSION} up (debug={settings.DEBUG})")
    logger.info(f"Saved runs go to {output_dir.resolve()}, sweep workers: {settings.MAX_WORKERS}")

    yield

    run_registry.cleanup()
    logger.info(f"{settings.APP_NAME} stopped with {len(run_registry.list())} runs in the registry")


app = FastAPI(
    title=settings.APP_NAME,
    version=settings.VERSION,
    description="Numerical lab for slow soliton collisions in multi-power NLS",
    docs_url="/docs" if settings.DEBUG else None,
    redoc_url="/redoc" if settings.DEBUG else None,
    lifespan=lifespan,
)

origins = ["*"] if settings.CORS_ORIGINS == "*" else [o.strip() for o in settings.CORS_ORIGINS.split(",")]
app.add_middleware(
    CORSMiddleware,
    allow_origins=origins,
    allow_credentials=True,
    allow_methods=["GET", "POST", "DELETE"],
    allow_headers=["*"],
)


@app.exception_handler(SolitonLabError)
async def lab_exception_handler(request: Request, exc: SolitonLabError):
    """Configuration errors become 400, numerical failures 422."""
    logger.warning(f"{request.url.path}: {exc.code}: {exc.message}")

    return JSONResponse(
        status_code=exc.status_code,
        content={
            "success": False,
            "error": exc.code,
            "message": exc.message,
            "detail": exc.to_dict()["detail"],
        }
    )


@app.exception_handler(Exception)
async def unhandled_exception_handler(request: Request, exc: Exception):
    logger.error(f"{request.url.path}: unhandled {type(exc).__name__}: {exc}", exc_info=True)
    return JSONResponse(
        status_code=500,
        content={
            "success": False,
            "error": "InternalError",
            "message": str(exc) if settings.DEBUG else "Unexpected failure",
            "detail": {},
        },
    )


@app.get("/")
async def root():
    return {"name": settings.APP_NAME, "version": settings.VERSION, "status": "healthy"}


@app.get("/health")
async def health():
    """Liveness plus the numerical defaults a run would start from."""
    return {
        "status": "healthy",
        "service": settings.APP_NAME,
        "version": settings.VERSION,
        "defaults": {
            "grid_n": settings.GRID_N,
            "dt": settings.DT,
            "scheme": settings.SCHEME,
            "correction_variant": settings.CORRECTION_VARIANT,
        },
        "runs": len(run_registry.list()),
    }


app.include_router(api_router, prefix="/api")


if __name__ == "__main__":
    import uvicorn

    logging.basicConfig(
        level=settings.LOG_LEVEL,
        format="%(asctime)s [%(levelname)s] %(name)s: %(message)s",
    )
    uvicorn.run("main:app", host="0.0.0.0", port=settings.PORT, reload=settings.DEBUG)
