"""Orbital window endpoint."""

import logging
from fastapi import APIRouter, HTTPException, Query

from app.core.errors import SolitonLabError
from app.models.api_models import CommandResponse
from app.models.lab_config import OrbitalConfig
from app.utils.run_service import run_command

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/orbital", response_model=CommandResponse)
async def orbital(
    request: OrbitalConfig,
    save: bool = Query(False),
    include_tables: bool = Query(False, alias="includeTables"),
):
    """
    Receding solitons plus an odd perturbation; checks the remainder bound and zeta' >= 3v/4.

    Example:
        ```bash
        curl -X POST http://localhost:3100/api/orbital \
          -H "Content-Type: application/json" \
          -d '{"v": 0.1, "perturbation": 1e-6}'
        ```
    """
    try:
        return await run_command("orbital", request, save=save, include_tables=include_tables)
    except (HTTPException, SolitonLabError):
        raise
    except Exception as e:
        logger.error(f"[orbital] Error: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))
