"""Application settings using pydantic-settings.

Process-level knobs live here; experiment parameters live in
:class:`simplextrack.schemas.AppConfig`. Values can be overridden via
environment variables prefixed with ``SIMPLEXTRACK_``.

Example:
    export SIMPLEXTRACK_CONFIG="configs/benchmark.json"
    export SIMPLEXTRACK_WORKERS=8
"""

from __future__ import annotations

from functools import lru_cache
from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Simplextrack process settings."""

    model_config = SettingsConfigDict(
        env_prefix="SIMPLEXTRACK_",
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
    )

    # Default JSON config used by every CLI command when --config is omitted
    config: Path | None = None

    output_dir: Path = Path("results")
    workers: int = Field(default=1, ge=1)
    log_level: str = "WARNING"


@lru_cache
def get_settings() -> Settings:
    """Return cached process settings (singleton)."""
    return Settings()
