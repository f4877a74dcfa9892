"""Ground-state profile endpoint."""

import logging
from fastapi import APIRouter, HTTPException, Query

from app.core.errors import SolitonLabError
from app.models.api_models import CommandResponse
from app.models.lab_config import ProfileConfig
from app.utils.run_service import run_command

logger = logging.getLogger(__name__)

router = APIRouter()


@router.post("/profile", response_model=CommandResponse)
async def profile(
    request: ProfileConfig,
    save: bool = Query(False, description="Write profile.txt, profile.json and report.json"),
):
    """
    Solve the ground state phi_omega of -phi'' + omega phi - F'(phi^2) phi = 0.

    Request Body:
        - nonlinearity (dict): {"kind": "cubic"} or a preset with coefficients
        - omega (float): Frequency
        - half_length (float, optional): Half width of the sample window
        - n (int, optional): Number of samples

    Returns:
        y0, mass, a_inf, decay rate and the stability margin dQ/domega

    Example:
        ```bash
        curl -X POST http://localhost:3100/api/profile \
          -H "Content-Type: application/json" \
          -d '{"nonlinearity": {"kind": "cubic"}, "omega": 1}'
        ```

    Response:
        ```json
        {
          "success": true,
          "runId": "3f2a9c0b51de",
          "command": "profile",
          "summary": {"omega": 1.0, "y0": 1.0, "mass": 2.0, "a_inf": 2.0, "stability_margin": 1.0}
        }
        ```
    """
    try:
        return await run_command("profile", request, save=save)
    except (HTTPException, SolitonLabError):
        raise
    except Exception as e:
        logger.error(f"[profile] Error: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))
