"""Tests for settings module."""

import pytest
import yaml
from pydantic import ValidationError

from specforge.errors import ConfigError
from specforge.settings import BenchSettings, ExplorationSettings, Settings


def test_empty_settings_creation():
    """Test creating empty settings."""
    settings = Settings()
    assert settings.engine.backend == "compiled"
    assert settings.engine.passes == "default"
    assert settings.instrument.sample_every == 10
    assert settings.exploration.window == 200
    assert settings.benches.duration == 4000


def test_unknown_keys_are_rejected():
    with pytest.raises(ValidationError):
        Settings(**{"engine": {"jit": True}})
    with pytest.raises(ValidationError):
        Settings(**{"projects": {}})


@pytest.mark.parametrize(
    "model, data",
    [
        (ExplorationSettings, {"warmup_fraction": 1.0}),
        (ExplorationSettings, {"watch_threshold": 0}),
        (ExplorationSettings, {"window_seconds": 0}),
        (BenchSettings, {"lpm_universe": (1 << 20) + 1}),
        (BenchSettings, {"duration": 0}),
    ],
)
def test_field_constraints(model, data):
    with pytest.raises(ValidationError):
        model(**data)


def test_missing_file_gives_defaults(temp_settings_dir):
    p = temp_settings_dir / "settings.yaml"
    s = Settings.from_file(p)
    assert s.settings_path == p
    assert s.benches == BenchSettings()
    assert not p.exists()


def test_empty_file_gives_defaults(temp_settings_dir):
    p = temp_settings_dir / "settings.yaml"
    p.write_text("")
    assert Settings.from_file(p).engine.backend == "compiled"


def test_invalid_files(temp_settings_dir):
    p = temp_settings_dir / "settings.yaml"
    p.write_text("- just\n- a list\n")
    with pytest.raises(ConfigError, match="mapping at the top level"):
        Settings.from_file(p)
    p.write_text("engine: [unclosed\n")
    with pytest.raises(ConfigError):
        Settings.from_file(p)


def test_settings_path_handling(small_settings_data, temp_settings_dir):
    p = temp_settings_dir / "nested" / "settings.yaml"
    s = Settings(**small_settings_data)
    assert s.settings_path is None
    saved = s.save(p)
    assert saved == p
    assert s.settings_path == p

    raw = yaml.safe_load(p.read_text())
    assert "settings_path" not in raw
    assert raw["benches"]["mmul_n"] == 4

    loaded = Settings.from_file(p)
    assert loaded.benches.mmul_n == 4
    assert loaded.exploration.settle_windows == 1
    assert loaded.engine == s.engine
