"""
Application configuration using Pydantic Settings.
Centralizes all configuration with type safety, validation, and environment variable support.

Every setting can be overridden with a CRITWIN_-prefixed environment variable
(e.g. CRITWIN_THREADS=8) or a .env file in the working directory.
"""

from pydantic import Field, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """
    Laboratory settings with environment variable support.

    All settings have defaults that reproduce the published constants;
    command-line flags override them per run.
    """

    # ========== Parallelism ==========
    threads: int = Field(
        default=1,
        ge=1,
        le=512,
        description="Worker count for replicate and grid parallelism (fallback for --threads)"
    )

    # ========== Extended Precision (lambda = 0 series) ==========
    digits: int = Field(
        default=34,
        ge=15,
        le=200,
        description="Significant decimal digits for the lambda=0 series engine"
    )
    ell0: int = Field(
        default=75,
        ge=1,
        le=400,
        description="Truncation index of the lambda=0 series"
    )

    # ========== Quadrature (general lambda) ==========
    quad_tol: float = Field(
        default=1e-10,
        gt=0.0,
        lt=1.0,
        description="Target relative error of the general-lambda quadrature"
    )
    series_tol: float = Field(
        default=1e-16,
        gt=0.0,
        lt=1e-3,
        description="Relative cutoff for the ell-truncation of the intensity series"
    )
    quad_limit: int = Field(
        default=400,
        ge=50,
        le=10000,
        description="Maximum adaptive subdivisions per quadrature piece"
    )

    # ========== Monte Carlo ==========
    max_edges: int = Field(
        default=50_000_000,
        ge=1000,
        description="Refuse a G(n,p) draw whose expected edge count exceeds this budget"
    )
    excursion_block_size: int = Field(
        default=1024,
        ge=1,
        le=1_000_000,
        description="Paths per RNG block in the excursion-area oracle"
    )
    enumeration_max_n: int = Field(
        default=5,
        ge=1,
        le=5,
        description="Largest n accepted by the exhaustive G(n,p) enumeration"
    )

    # ========== Profile / Figure defaults ==========
    profile_lo: float = Field(
        default=-1.75,
        description="Left end of the default log f profile range"
    )
    profile_hi: float = Field(
        default=3.75,
        description="Right end of the default log f profile range"
    )
    grid_step: float = Field(
        default=0.05,
        gt=0.0,
        le=0.05,
        description="Grid step of profiles and the coarse maximizer scan"
    )

    # ========== Logging ==========
    log_level: str = Field(
        default="WARNING",
        description="Log level for structured diagnostics on stderr (DEBUG, INFO, WARNING, ERROR)"
    )
    log_json: bool = Field(
        default=False,
        description="Render log lines as JSON instead of the console renderer"
    )

    # ========== Pydantic Configuration ==========
    model_config = SettingsConfigDict(
        env_prefix="CRITWIN_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"  # Ignore extra fields in .env
    )

    @field_validator("log_level", mode="before")
    @classmethod
    def validate_log_level(cls, v) -> str:
        """Normalize and check the log level name"""
        level = str(v).strip().upper()
        if level not in {"DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"}:
            raise ValueError(f"Unknown log level: {v}")
        return level

    @field_validator("profile_hi")
    @classmethod
    def validate_profile_range(cls, v: float, info) -> float:
        lo = info.data.get("profile_lo")
        if lo is not None and v <= lo:
            raise ValueError("profile_hi must exceed profile_lo")
        return v



# Global settings instance
# This will load from .env automatically
settings = Settings()


def get_settings() -> Settings:
    """
    Get the global settings instance.

    Exists for dependency injection in tests (monkeypatch this function or
    pass explicit values to the services).

    Returns:
        Global settings instance
    """
    return settings
