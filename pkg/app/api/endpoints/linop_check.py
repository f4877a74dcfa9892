"""Linearized operator diagnostics endpoint."""

import logging
from fastapi import APIRouter, HTTPException, Query

from app.core.errors import SolitonLabError
from app.models.api_models import CommandResponse
from app.models.lab_config import LinopCheckConfig
from app.utils.run_service import run_command

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/linop-check", response_model=CommandResponse)
async def linop_check(request: LinopCheckConfig, save: bool = Query(False)):
    """
    Kernel and identity residuals of S_omega, coercivity floors and the interaction constant.

    Example:
        ```bash
        curl -X POST http://localhost:3100/api/linop-check \
          -H "Content-Type: application/json" \
          -d '{"omega": 1, "grid": {"n": 1024, "L": 80}}'
        ```
    """
    try:
        return await run_command("linop-check", request, save=save)
    except (HTTPException, SolitonLabError):
        raise
    except Exception as e:
        logger.error(f"[linop-check] Error: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))
