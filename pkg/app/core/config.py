"""
Application configuration settings for MTLRRC.
"""

import os
from functools import lru_cache

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from app import __version__


class Settings(BaseSettings):
    """
    Solver and runtime defaults loaded from environment variables (prefix ``MTLRRC_``).
    """

    model_config = SettingsConfigDict(env_file=".env", env_file_encoding="utf-8", extra="ignore", env_prefix="MTLRRC_")

    # Application settings
    APP_NAME: str = Field(default="MTLRRC")
    APP_VERSION: str = Field(default=__version__)
    APP_DESCRIPTION: str = Field(default="Multi-task learning via robust regularized clustering")

    # Logging
    LOG_LEVEL: str = Field(default="INFO")
    SOLVER_LOG_LEVEL: str = Field(default="WARNING", description="Level of the per-iteration solver loggers")

    # Model defaults
    DEFAULT_K: int = Field(default=5, description="Neighbours per task in the k-NN task graph")
    DEFAULT_NU: float = Field(default=1.0, description="ADMM parameter nu")
    SCAD_GAMMA: float = Field(default=3.7, description="Default gamma for group SCAD")
    MCP_GAMMA: float = Field(default=3.0, description="Default gamma for group MCP")
    STL_RIDGE_PENALTY: float = Field(default=1e-2, description="Ridge penalty of the single-task learner")

    # Newton-Raphson (W-step)
    NEWTON_TOL: float = Field(default=1e-8)
    NEWTON_MAX_ITER: int = Field(default=100)
    NEWTON_MAX_HALVINGS: int = Field(default=30, description="Step halvings before a Newton step is accepted")

    # FISTA inner loop (U-step)
    FISTA_TOL: float = Field(default=1e-8)
    FISTA_MAX_ITER: int = Field(default=2000)
    FISTA_RESTART: bool = Field(default=True, description="Gradient-based momentum restart")

    # Outer loops
    OUTER_TOL: float = Field(default=1e-6)
    MAX_OUTER: int = Field(default=500)
    RRC_TOL: float = Field(default=1e-7)
    RRC_MAX_SWEEPS: int = Field(default=500)

    # Post-processing
    CLUSTER_FUSION_TOL: float = Field(default=1e-4, description="Relative tolerance for fused centroids")

    # Parallelism; 0 means one worker per CPU core, capped at 8
    WORKERS: int = Field(default=1, description="Worker threads for grid points and replicates")

    @field_validator("WORKERS")
    @classmethod
    def validate_workers(cls, v):
        if v < 0:
            raise ValueError("WORKERS must be 0 (auto) or positive")
        return v


class TestSettings(Settings):
    """
    Test-specific settings that don't load from .env file and do not
    read real environment variables (isolated from host environment).
    """

    model_config = SettingsConfigDict(extra="ignore", env_file=None, env_prefix="TEST_")


@lru_cache()
def get_settings() -> Settings:
    """
    Get application settings, cached for performance.

    Returns:
        Settings object with application configuration
    """
    # Use test settings if we're in a test environment
    if os.getenv("PYTEST_VERSION"):
        return TestSettings()
    return Settings()


def resolve_workers(workers: int | None = None) -> int:
    """
    Resolve a worker count; ``0`` picks one worker per CPU core, capped at 8.
    """
    if workers is None:
        workers = settings.WORKERS
    if workers == 0:
        workers = min(max(os.cpu_count() or 1, 1), 8)
    return workers


# Export settings instance for easy access
settings = get_settings()
