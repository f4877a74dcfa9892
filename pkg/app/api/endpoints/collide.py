"""Single collision endpoint."""

import logging
from fastapi import APIRouter, HTTPException, Query

from app.core.errors import SolitonLabError
from app.models.api_models import CommandResponse
from app.models.lab_config import CollisionConfig
from app.utils.run_service import run_command

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/collide", response_model=CommandResponse)
async def collide(
    request: CollisionConfig,
    save: bool = Query(False),
    include_tables: bool = Query(False, alias="includeTables"),
):
    """
    Evolve prepared two-soliton data through the collision.

    The report carries v_in, v_out, the inelasticity |v_out - v_in|, the final
    remainder norm, conservation drift and half-momentum checks.

    Example:
        ```bash
        curl -X POST http://localhost:3100/api/collide \
          -H "Content-Type: application/json" \
          -d '{"nonlinearity": {"kind": "cubic_quintic", "a": 2, "b": 0.1}, "omega": 1, "v": 0.2}'
        ```
    """
    try:
        return await run_command("collide", request, save=save, include_tables=include_tables)
    except (HTTPException, SolitonLabError):
        raise
    except Exception as e:
        logger.error(f"[collide] Error: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))
