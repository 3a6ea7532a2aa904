"""
Configuration management for Honest Forest Lab.
"""

from pathlib import Path
from typing import Optional
from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Global configuration settings."""

    model_config = SettingsConfigDict(
        env_prefix="HONEST_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
        protected_namespaces=()
    )

    # Logging
    log_level: str = Field(default="INFO", description="Logging level")
    log_file: Optional[Path] = Field(default=Path("./logs/forest_lab.log"), description="Log file path")

    # Outputs
    output_dir: Path = Field(default=Path("./results"), description="Default output directory")

    # Parallel execution
    n_jobs: int = Field(default=1, description="Worker count (-1 uses every core)")
    parallel_backend: str = Field(default="loky", description="joblib backend")
    chunk_size: int = Field(default=64, ge=1, description="Items per dispatched task")

    # Forest defaults (the simulation design of the correlation study)
    default_trees: int = Field(default=5000, ge=1, description="Monte Carlo trees B")
    default_delta: float = Field(default=0.5, ge=0.0, le=1.0, description="Coin probability")
    default_alpha: float = Field(default=0.01, gt=0.0, lt=0.5, description="Regularity fraction")
    default_k: int = Field(default=1, ge=1, description="Terminal size parameter")
    default_grid: int = Field(default=101, ge=2, description="Per-axis grid resolution")

    # Numerical limits
    condition_limit: float = Field(default=1e12, gt=1.0, description="Largest accepted condition number")
    bucket_width: float = Field(default=0.02, gt=0.0, description="L1 distance bucket width")
    log_floor: float = Field(default=0.01, gt=0.0, description="Smallest correlation used on log scale")


# Global settings instance
settings = Settings()
