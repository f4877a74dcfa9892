"""Run manifests and the in-process registry of runs."""

import time
import uuid
from dataclasses import dataclass, field
from typing import Any, Dict, List, Literal, Optional

from pydantic import BaseModel, ConfigDict, Field

from app.config.settings import settings


class RunManifest(BaseModel):
    """Provenance of one output directory."""

    model_config = ConfigDict(populate_by_name=True)

    run_id: str = Field(default_factory=lambda: uuid.uuid4().hex[:12], alias="runId")
    command: str
    config_hash: str = Field(..., alias="configHash")
    config: Dict[str, Any] = Field(default_factory=dict)
    code_version: str = Field(default_factory=lambda: settings.VERSION, alias="codeVersion")
    seed: int = Field(default_factory=lambda: settings.SEED)
    overrides: Dict[str, Any] = Field(default_factory=dict, description="Settings changed with --set")
    started_at: float = Field(default_factory=time.time, alias="startedAt")
    finished_at: Optional[float] = Field(None, alias="finishedAt")
    status: Literal["running", "success", "failed"] = "running"
    outputs: List[str] = Field(default_factory=list)
    error: Optional[Dict[str, Any]] = None

    def finish(self, outputs: Optional[List[str]] = None, error: Optional[Dict[str, Any]] = None) -> "RunManifest":
        self.finished_at = time.time()
        self.status = "failed" if error else "success"
        self.error = error
        if outputs:
            self.outputs.extend(outputs)
        return self


@dataclass
class RunRegistry:
    """Manifests of runs started through the service."""

    _runs: Dict[str, RunManifest] = field(default_factory=dict)
    max_runs: int = 200

    def register(self, manifest: RunManifest) -> RunManifest:
        self._runs[manifest.run_id] = manifest
        self.cleanup()
        return manifest

    def get(self, run_id: str) -> Optional[RunManifest]:
        return self._runs.get(run_id)

    def list(self) -> List[RunManifest]:
        return sorted(self._runs.values(), key=lambda m: m.started_at, reverse=True)

    def remove(self, run_id: str) -> bool:
        return self._runs.pop(run_id, None) is not None

    def cleanup(self):
        """Drop the oldest manifests beyond max_runs."""
        if len(self._runs) > self.max_runs:
            for manifest in self.list()[self.max_runs:]:
                del self._runs[manifest.run_id]


# Global run registry
run_registry = RunRegistry()
