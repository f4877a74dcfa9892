"""Tests for the HTTP service."""

import json

import httpx
import pytest
from fastapi.testclient import TestClient
from sse_starlette.sse import AppStatus

from main import app
from app.config.settings import settings
from app.models.run_manifest import run_registry


@pytest.fixture(scope="module")
def client():
    with TestClient(app) as test_client:
        yield test_client


@pytest.fixture(autouse=True)
def fresh_sse_status():
    # the shutdown event is bound to the first event loop that used it
    if hasattr(AppStatus, "should_exit_event"):
        AppStatus.should_exit_event = None
    yield


class TestHealth:
    def test_root(self, client):
        response = client.get("/")
        assert response.status_code == 200
        assert response.json()["status"] == "healthy"

    def test_health(self, client):
        body = client.get("/health").json()
        assert body["service"] == "Soliton Collision Lab"


class TestCommands:
    def test_profile(self, client):
        response = client.post("/api/profile", json={"omega": 1.0})
        assert response.status_code == 200
        body = response.json()
        assert body["success"] is True
        assert body["command"] == "profile"
        assert body["summary"]["y0"] == pytest.approx(1.0, rel=1e-8)
        assert body["tables"] is None
        assert run_registry.get(body["runId"]).status == "success"

    def test_validation_error(self, client):
        response = client.post("/api/profile", json={"omega": -1.0})
        assert response.status_code == 422

    def test_missing_snapshot(self, client):
        response = client.post("/api/fit", json={"snapshot": "/nonexistent/snapshot.csv"})
        assert response.status_code == 400
        body = response.json()
        assert body["success"] is False
        assert body["error"] == "ConfigError"

    def test_fit_outside_basin(self, client):
        response = client.post("/api/fit", json={"zeta_offset": 5.0})
        assert response.status_code == 422
        assert response.json()["error"] == "NoConvergence"

    def test_fit(self, client):
        response = client.post("/api/fit", json={"zeta_offset": 0.02})
        assert response.status_code == 200
        assert response.json()["summary"]["shifts"]["zeta"] == pytest.approx(0.02, abs=1e-8)

    def test_save_writes_outputs(self, client, tmp_path, monkeypatch):
        monkeypatch.setattr(settings, "OUTPUT_DIR", str(tmp_path))
        body = client.post("/api/profile?save=true", json={"omega": 1.0}).json()
        assert "profile.txt" in body["outputs"]
        assert (tmp_path / "profile" / body["runId"] / "manifest.json").is_file()


class TestRuns:
    def test_list_get_delete(self, client):
        run_id = client.post("/api/profile", json={"omega": 2.0}).json()["runId"]

        listing = client.get("/api/runs").json()
        assert listing["count"] == len(listing["runs"])
        assert run_id in [run["runId"] for run in listing["runs"]]

        fetched = client.get(f"/api/runs/{run_id}").json()
        assert fetched["run"]["command"] == "profile"

        assert client.delete(f"/api/runs/{run_id}").status_code == 200
        assert client.get(f"/api/runs/{run_id}").status_code == 404
        assert client.delete(f"/api/runs/{run_id}").status_code == 404


class TestEvolveStream:
    async def test_stream_events(self):
        payload = {
            "v": 0.2,
            "grid": {"n": 512, "L": 60.0},
            "time": {"t_start": 0.0, "t_end": 0.1, "dt": 1e-3, "snapshot_stride": 50},
        }
        events = []
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://test") as client:
            async with client.stream("POST", "/api/evolve/stream", json=payload) as response:
                assert response.status_code == 200
                async for line in response.aiter_lines():
                    if line.startswith("data:"):
                        events.append(json.loads(line[len("data:"):].strip()))

        types = [event["type"] for event in events]
        assert types == ["start", "observation", "observation", "observation", "complete"]
        assert events[0]["steps"] == 100
        assert events[1]["row"]["t"] == pytest.approx(0.0)
        assert events[-1]["snapshots"] == 3

    async def test_setup_error(self):
        transport = httpx.ASGITransport(app=app)
        async with httpx.AsyncClient(transport=transport, base_url="http://test") as client:
            response = await client.post(
                "/api/evolve/stream",
                json={"v": 0.2, "zeta0": 29.5, "grid": {"n": 512, "L": 60.0}},
            )
        assert response.status_code == 422
        assert response.json()["error"] == "WrapAround"
