"""Settings configuration for the relay NOMA link analyzer."""

from pydantic_settings import BaseSettings, SettingsConfigDict
from pydantic import Field
from dotenv import load_dotenv
import logging


class Settings(BaseSettings):
    """Application settings with environment variable support."""

    model_config = SettingsConfigDict(
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore"
    )

    # Logging
    log_level: str = Field(default="INFO", description="Logging level")

    # Monte Carlo
    mc_threads: int = Field(default=4, ge=1, description="Worker threads for Monte Carlo blocks")
    mc_block_size: int = Field(default=65536, ge=1000, description="Draws per Monte Carlo block")
    default_mc_iterations: int = Field(default=1_000_000, ge=1000, description="Iterations when a scenario omits [mc]")
    default_seed: int = Field(default=20240601, ge=0, description="Master seed when a scenario omits [mc]")

    # Sweeps
    sweep_workers: int = Field(default=2, ge=1, description="Concurrent sweep points")

    # Numerics
    quad_rel_tol: float = Field(default=1e-8, gt=0, description="Relative tolerance of outer quadratures")
    series_tol: float = Field(default=1e-12, gt=0, description="Relative term tolerance of infinite series")
    series_max_terms: int = Field(default=200, ge=1, description="Hard cap on series terms")
    distinct_rel_tol: float = Field(default=1e-9, gt=0, description="Relative distinctness guard for interference terms")
    jitter_degenerate: bool = Field(
        default=False,
        description="Perturb degenerate or duplicate inputs by 1e-9 relative instead of failing"
    )


def load_settings() -> Settings:
    """Load settings with proper error handling and environment loading."""
    # Load environment variables from .env file
    load_dotenv()

    try:
        settings = Settings()

        # Configure logging
        logging.basicConfig(
            level=getattr(logging, settings.log_level.upper()),
            format='%(asctime)s - %(name)s - %(levelname)s - %(message)s'
        )

        return settings
    except Exception as e:
        error_msg = f"Failed to load settings: {e}"
        if "mc_threads" in str(e).lower():
            error_msg += "\nMake sure MC_THREADS is a positive integer in your .env file"
        elif "log_level" in str(e).lower():
            error_msg += "\nMake sure LOG_LEVEL is one of DEBUG, INFO, WARNING, ERROR"
        raise ValueError(error_msg) from e
