"""Ansatz residual scaling endpoint."""

import logging
from fastapi import APIRouter, HTTPException, Query

from app.core.errors import SolitonLabError
from app.models.api_models import CommandResponse
from app.models.lab_config import ResidualConfig
from app.utils.run_service import run_command

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/ansatz-residual", response_model=CommandResponse)
async def ansatz_residual(
    request: ResidualConfig,
    save: bool = Query(False),
    include_tables: bool = Query(False, alias="includeTables"),
):
    """
    H1 and L2 norms of the ansatz residual over v for each order, with log-log slopes.

    Request Body:
        - v_list (list): Speeds, at least two
        - orders (list): Any of 0, 1, "refined"
        - t (float): Evaluation time
        - variant (str, optional): "displayed" or "balanced" corrections

    Example:
        ```bash
        curl -X POST "http://localhost:3100/api/ansatz-residual?includeTables=true" \
          -H "Content-Type: application/json" \
          -d '{"v_list": [0.05, 0.1, 0.2, 0.3], "orders": [0, 1]}'
        ```
    """
    try:
        return await run_command("ansatz-residual", request, save=save, include_tables=include_tables)
    except (HTTPException, SolitonLabError):
        raise
    except Exception as e:
        logger.error(f"[ansatz-residual] Error: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))
