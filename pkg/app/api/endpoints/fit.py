"""Modulation fit endpoint."""

import logging
from fastapi import APIRouter, HTTPException, Query

from app.core.errors import SolitonLabError
from app.models.api_models import CommandResponse
from app.models.lab_config import FitConfig
from app.utils.run_service import run_command

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/fit", response_model=CommandResponse)
async def fit(request: FitConfig, save: bool = Query(False)):
    """
    Fit modulation parameters to a snapshot, or to the ansatz moved by a known offset.

    Request Body:
        - v (float): Half-speed of the reference dynamics
        - t (float): Reference time (ignored when a snapshot is given)
        - snapshot (str, optional): Path of a snapshot CSV on the server
        - zeta_offset, phase_offset (float): Offsets applied to the generated field

    Example:
        ```bash
        curl -X POST http://localhost:3100/api/fit \
          -H "Content-Type: application/json" \
          -d '{"v": 0.2, "t": -20, "zeta_offset": 0.01, "phase_offset": 0.02}'
        ```
    """
    try:
        return await run_command("fit", request, save=save)
    except (HTTPException, SolitonLabError):
        raise
    except Exception as e:
        logger.error(f"[fit] Error: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))
