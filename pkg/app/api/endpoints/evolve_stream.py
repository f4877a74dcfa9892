"""Streaming evolve endpoint."""

import json
import logging
from fastapi import APIRouter, HTTPException
from fastapi.concurrency import run_in_threadpool
from sse_starlette.sse import EventSourceResponse

from app.core.commands import evolve_setup, stream_evolve
from app.core.errors import SolitonLabError
from app.models.api_models import StreamEvent
from app.models.lab_config import EvolveConfig
from app.utils.output_writer import jsonable
from app.utils.run_service import start_manifest

logger = logging.getLogger(__name__)

router = APIRouter()


def _event(**fields) -> dict:
    event = StreamEvent(**fields)
    return {"event": "message", "data": json.dumps(jsonable(event.model_dump(by_alias=True, exclude_none=True)))}


@router.post("/evolve/stream")
async def evolve_stream(request: EvolveConfig):
    """
    Evolve a single boosted soliton or prepared collision data and stream observer rows.

    Events (all sent as "message", JSON data):
        - {"type": "start", "runId": ..., "steps": N}
        - {"type": "observation", "index": i, "row": {t, H, Q, M, Q_plus, M_plus, flux, ...}}
        - {"type": "complete", "snapshots": count}
        - {"type": "error", "error": code, "message": ...}

    Example:
        ```bash
        curl -N -X POST http://localhost:3100/api/evolve/stream \
          -H "Content-Type: application/json" \
          -d '{"v": 0.2, "time": {"t_start": 0, "t_end": 5, "snapshot_stride": 500}}'
        ```
    """
    try:
        setup = await run_in_threadpool(evolve_setup, request)
    except (HTTPException, SolitonLabError):
        raise
    except Exception as e:
        logger.error(f"[evolve-stream] Setup error: {e}", exc_info=True)
        raise HTTPException(status_code=500, detail=str(e))

    manifest = start_manifest("evolve", request)

    async def event_generator():
        """Advance the integrator one snapshot at a time off the event loop."""
        index = 0
        rows = stream_evolve(setup)
        try:
            yield _event(type="start", run_id=manifest.run_id, steps=setup.time.n_steps)
            while True:
                row = await run_in_threadpool(next, rows, None)
                if row is None:
                    break
                yield _event(type="observation", index=index, row=row)
                index += 1
            manifest.finish()
            yield _event(type="complete", run_id=manifest.run_id, snapshots=index, message="Evolution finished")

        except SolitonLabError as e:
            logger.warning(f"[evolve-stream] {e.code}: {e.message}")
            manifest.finish(error=e.to_dict())
            yield _event(type="error", error=e.code, message=e.message, detail=jsonable(e.detail))
        except Exception as e:
            logger.error(f"[evolve-stream] Error: {e}", exc_info=True)
            manifest.finish(error={"error": type(e).__name__, "message": str(e)})
            yield _event(type="error", error=type(e).__name__, message=str(e))

    return EventSourceResponse(
        event_generator(),
        media_type="text/event-stream",
        headers={
            "Cache-Control": "no-cache, no-store, must-revalidate",
            "Connection": "keep-alive",
            "X-Accel-Buffering": "no",
        },
        ping=15,
    )
