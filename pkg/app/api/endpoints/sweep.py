"""Collision sweep endpoint."""

import logging
from fastapi import APIRouter, HTTPException, Query

from app.core.errors import SolitonLabError
from app.models.api_models import CommandResponse
from app.models.lab_config import SweepConfig
from app.utils.run_service import run_command

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/sweep", response_model=CommandResponse)
async def sweep(request: SweepConfig, save: bool = Query(False)):
    """
    Collisions at every speed of v_list in a process pool, with fitted log-log slopes.

    Example:
        ```bash
        curl -X POST http://localhost:3100/api/sweep \
          -H "Content-Type: application/json" \
          -d '{"nonlinearity": {"kind": "cubic_quintic", "a": 2, "b": 0.1}, "v_list": [0.1, 0.15, 0.2, 0.3]}'
        ```
    """
    try:
        return await run_command("sweep", request, save=save)
    except (HTTPException, SolitonLabError):
        raise
    except Exception as e:
        logger.error(f"[sweep] Error: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))
