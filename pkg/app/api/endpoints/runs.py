"""Run registry endpoints."""

from fastapi import APIRouter, HTTPException

from app.models.api_models import RunListResponse, RunResponse
from app.models.run_manifest import run_registry


router = APIRouter()


@router.get("/runs", response_model=RunListResponse)
async def list_runs():
    """
    List manifests of runs started through the service, newest first.

    Example:
        ```bash
        curl http://localhost:3100/api/runs
        ```
    """
    runs = run_registry.list()
    return RunListResponse(runs=runs, count=len(runs))


@router.get("/runs/{run_id}", response_model=RunResponse)
async def get_run(run_id: str):
    """Manifest of one run."""
    manifest = run_registry.get(run_id)
    if manifest is None:
        raise HTTPException(status_code=404, detail=f"Run {run_id} not found")
    return RunResponse(run=manifest)


@router.delete("/runs/{run_id}", response_model=RunResponse)
async def delete_run(run_id: str):
    if not run_registry.remove(run_id):
        raise HTTPException(status_code=404, detail=f"Run {run_id} not found")
    return RunResponse(message=f"Run {run_id} removed")
