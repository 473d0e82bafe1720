from __future__ import annotations

import os
from enum import Enum
from functools import lru_cache

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict

from src.infra.logger import get_logger

logger = get_logger()


class Environment(str, Enum):
    """Where the process runs."""

    LOCAL = "local"
    CI = "ci"


class Settings(BaseSettings):
    """Process-wide settings read from the environment and config/.env."""

    # General
    project_name: str = Field("offramp", description="Project name")
    environment: Environment = Field(Environment.LOCAL, alias="ENVIRONMENT", description="Execution environment")
    debug: bool = Field(False, alias="DEBUG", description="True if debug logging is enabled")

    # Progress bars are noise in CI logs
    progress_bars: bool = Field(True, alias="OFFRAMP_PROGRESS", description="Show tqdm progress bars")

    # Benchmark protocol
    bench_warmup: int = Field(5, ge=0, description="Untimed decodes before measuring")
    bench_repetitions: int = Field(30, ge=30, description="Timed decodes per (mode, T)")

    # Monitoring
    logfire_write_token: str | None = Field(None, alias="LOGFIRE_TOKEN", description="Logfire write token, optional.")

    model_config = SettingsConfigDict(
        env_file=os.path.join("config", ".env"),
        env_file_encoding="utf-8",
        env_nested_delimiter="__",
        case_sensitive=False,
        extra="ignore",
        populate_by_name=True,
    )

    @property
    def show_progress(self) -> bool:
        """Progress bars only locally."""
        return self.progress_bars and self.environment == Environment.LOCAL

    @property
    def progress_disable(self) -> bool | None:
        """tqdm ``disable`` value: None lets tqdm switch itself off when stderr is not a TTY."""
        return None if self.show_progress else True


def initialize_settings() -> Settings:
    """Initialize settings."""
    try:
        settings = Settings()
        logger.debug("Initialized settings successfully.")
        return settings
    except ValueError as e:
        logger.exception("Invalid settings in the environment.")
        raise ValueError(f"An error occurred during settings loading: {str(e)}") from e


settings = initialize_settings()


@lru_cache
def get_settings() -> Settings:
    """Get settings."""
    return settings
