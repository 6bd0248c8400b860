"""Settings models for the runtime, the policy and the benchmark scenarios."""

from pathlib import Path
from typing import Literal

import yaml
from pydantic import BaseModel as PydanticBaseModel, ConfigDict, Field, field_validator

from .constants import (
    DEFAULT_MAX_GROWTH,
    DEFAULT_PROFILE_CAPACITY,
    DEFAULT_SETTINGS_FN,
    DEFAULT_UNROLL_MAX_FACTOR,
    HISTOGRAM_MAX_BUCKETS,
)
from .errors import ConfigError


class BaseModel(PydanticBaseModel):
    model_config = ConfigDict(extra="forbid")


class EngineSettings(BaseModel):
    """Execution backend and optimizer limits."""

    backend: Literal["compiled", "interp"] = "compiled"
    passes: str = Field(
        "default", description="'default', 'none' or a comma separated pass list"
    )
    unroll_max_factor: int = Field(DEFAULT_UNROLL_MAX_FACTOR, ge=0)
    max_growth: int = Field(
        DEFAULT_MAX_GROWTH, ge=1, description="Code growth cap relative to the input"
    )


class InstrumentSettings(BaseModel):
    capacity: int = Field(DEFAULT_PROFILE_CAPACITY, ge=1)
    histogram_max_buckets: int = Field(HISTOGRAM_MAX_BUCKETS, ge=1)
    sample_every: int = Field(
        10, ge=1, description="Default sampling interval k of taps"
    )


class ExplorationSettings(BaseModel):
    """Window sizes and thresholds of the exploration policy."""

    window: int = Field(
        200, ge=1, description="Invocations per window in deterministic mode"
    )
    window_seconds: float = Field(0.25, gt=0, description="Window length in live mode")
    warmup_fraction: float = Field(0.10, ge=0, lt=1)
    watch_threshold: float = Field(0.25, gt=0, lt=1)
    watch_interval: float | None = Field(
        None, gt=0, description="Unconditional re-exploration period"
    )
    settle_windows: int = Field(3, ge=1)
    instrument_windows: int = Field(1, ge=1)
    range_samples: int = Field(4, ge=1)


class BenchSettings(BaseModel):
    """Default workload parameters of the benchmark scenarios."""

    duration: int = Field(4000, ge=1, description="Invocations per phase")
    mmul_n: int = Field(16, ge=1)
    mmul_b: int = Field(8, ge=1, description="Block size passed by the fixed code")
    lpm_rules: int = Field(100, ge=0)
    lpm_fastpath_size: int = Field(8, ge=0)
    lpm_zipf_exponent: float = Field(1.1, gt=0)
    lpm_universe: int = Field(1000, ge=1)
    simple_value: int = 7
    batch_size: int = Field(16, ge=1, description="BATCH_SIZE passed by the fixed code")
    batch_capacity: int = Field(64, ge=1)

    @field_validator("lpm_universe")
    @classmethod
    def validate_universe(cls, v: int) -> int:
        if v > 1 << 20:
            raise ValueError("key universe larger than 2^20 keys")
        return v


def default_settings_path() -> Path:
    return Path(".") / DEFAULT_SETTINGS_FN


class Settings(BaseModel):
    """Main settings configuration."""

    engine: EngineSettings = Field(default_factory=EngineSettings)
    instrument: InstrumentSettings = Field(default_factory=InstrumentSettings)
    exploration: ExplorationSettings = Field(default_factory=ExplorationSettings)
    benches: BenchSettings = Field(default_factory=BenchSettings)

    settings_path: Path | None = Field(None, exclude=True)

    @classmethod
    def from_file(cls, settings_path: Path) -> "Settings":
        """Load settings from file; a missing file yields the defaults."""
        if not settings_path.exists():
            return cls(settings_path=settings_path)
        with open(settings_path, encoding="utf-8") as f:
            try:
                data = yaml.safe_load(f)
            except yaml.YAMLError as err:
                raise ConfigError(f"{settings_path}: {err}") from err
        if data is None:
            data = {}
        if not isinstance(data, dict):
            raise ConfigError(f"{settings_path}: expected a mapping at the top level")
        return cls(**data, settings_path=settings_path)

    def save(self, settings_path: Path | None = None) -> Path:
        """Save settings to file."""
        path = settings_path or self.settings_path or default_settings_path()
        path.parent.mkdir(parents=True, exist_ok=True)
        data_dump = self.model_dump(mode="json")
        with open(path, "w", encoding="utf-8") as f:
            yaml.dump(data_dump, f, default_flow_style=False, indent=2)
        self.settings_path = path
        return path
