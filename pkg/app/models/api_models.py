"""API request and response models."""

from pydantic import BaseModel, ConfigDict, Field
from typing import Optional, Dict, List, Any, Literal

from app.models.run_manifest import RunManifest


class CommandResponse(BaseModel):
    """Response of every POST /api/<command> endpoint."""

    model_config = ConfigDict(populate_by_name=True)

    success: bool = True
    run_id: str = Field(..., alias="runId")
    command: str
    summary: Dict[str, Any] = Field(default_factory=dict, description="The report JSON of the run")
    tables: Optional[Dict[str, List[Dict[str, Any]]]] = Field(
        None, description="CSV tables as rows; only when includeTables is set"
    )
    outputs: List[str] = Field(default_factory=list, description="Files written when save is set")
    output_dir: Optional[str] = Field(None, alias="outputDir")


class StreamEvent(BaseModel):
    """Server-Sent Event of the evolve stream."""

    type: Literal["start", "observation", "complete", "error"]
    run_id: Optional[str] = Field(None, alias="runId")
    message: Optional[str] = None
    index: Optional[int] = None
    row: Optional[Dict[str, Any]] = None
    steps: Optional[int] = None
    snapshots: Optional[int] = None
    error: Optional[str] = None
    detail: Optional[Dict[str, Any]] = None


class RunListResponse(BaseModel):
    model_config = ConfigDict(populate_by_name=True)

    success: bool = True
    runs: List[RunManifest] = Field(default_factory=list)
    count: int = 0


class RunResponse(BaseModel):
    success: bool = True
    run: Optional[RunManifest] = None
    message: Optional[str] = None


class ErrorResponse(BaseModel):
    success: bool = False
    error: str
    message: Optional[str] = None
    detail: Any = None
