"""Tests for config models, settings overrides and the run registry."""

import pytest
from pydantic import ValidationError

from app.config.settings import Settings, apply_overrides, settings
from app.core.errors import ConfigError
from app.models.lab_config import CollisionConfig, GridSpec, NonlinearitySpec, OrbitalConfig, SweepConfig, TimeSpec
from app.models.run_manifest import RunManifest, RunRegistry


class TestLabConfig:
    def test_nonlinearity_presets(self):
        assert NonlinearitySpec().build().to_pairs() == NonlinearitySpec(kind="pairs", pairs=[(2, 1.0)]).build().to_pairs()
        with pytest.raises(ValidationError):
            NonlinearitySpec(kind="pairs")

    def test_grid_alias(self):
        grid = GridSpec.model_validate({"n": 1024, "L": 60.0})
        assert grid.length == 60.0
        assert GridSpec(n=512, length=40.0).build().n == 512

    def test_time_defaults_follow_settings(self):
        spec = TimeSpec()
        assert spec.dt == settings.DT
        assert spec.scheme == settings.SCHEME
        with pytest.raises(ValidationError):
            TimeSpec(dt=0.0)

    def test_collision_bounds(self):
        with pytest.raises(ValidationError):
            CollisionConfig(v=1.5)
        with pytest.raises(ValidationError):
            CollisionConfig(order=2)

    def test_sweep_sorts_speeds(self):
        config = SweepConfig(v_list=[0.3, 0.1, 0.2])
        assert config.v_list == [0.1, 0.2, 0.3]
        single = config.at_speed(0.15)
        assert isinstance(single, CollisionConfig)
        assert single.v == 0.15

    def test_sweep_needs_three_speeds(self):
        with pytest.raises(ValidationError):
            SweepConfig(v_list=[0.1, 0.2])
        with pytest.raises(ValidationError):
            SweepConfig(v_list=[0.1, 0.2, 1.2])

    def test_orbital_defaults(self):
        config = OrbitalConfig(v=0.1)
        assert config.initial_separation() == pytest.approx(16.0 * 2.302585092994046)
        assert config.duration() == pytest.approx(200.0)


class TestOverrides:
    @pytest.fixture(autouse=True)
    def restore(self):
        saved = settings.model_dump()
        yield
        for key, value in saved.items():
            setattr(settings, key, value)

    def test_strings_are_converted(self):
        applied = apply_overrides({"FIT_TOL": "1e-9", "GRID_N": "1024"})
        assert applied == {"FIT_TOL": 1e-9, "GRID_N": 1024}
        assert settings.GRID_N == 1024

    def test_unknown_key(self):
        with pytest.raises(ConfigError):
            apply_overrides({"NOT_A_SETTING": "1"})

    def test_invalid_value(self):
        with pytest.raises(ConfigError):
            apply_overrides({"FIT_TOL": "tight"})

    def test_defaults(self):
        defaults = Settings()
        assert defaults.CORRECTION_VARIANT == "balanced"
        assert defaults.SCHEME == "strang"


class TestRunRegistry:
    def test_finish(self):
        manifest = RunManifest(command="fit", config_hash="x")
        assert manifest.status == "running"
        manifest.finish(error={"error": "NoConvergence"})
        assert manifest.status == "failed"
        assert manifest.finished_at >= manifest.started_at

    def test_cleanup_keeps_newest(self):
        registry = RunRegistry(max_runs=2)
        manifests = [RunManifest(command="profile", config_hash=str(i), started_at=float(i)) for i in range(3)]
        for manifest in manifests:
            registry.register(manifest)
        assert registry.get(manifests[0].run_id) is None
        assert [m.run_id for m in registry.list()] == [manifests[2].run_id, manifests[1].run_id]
        assert registry.remove(manifests[1].run_id)
        assert not registry.remove(manifests[1].run_id)
