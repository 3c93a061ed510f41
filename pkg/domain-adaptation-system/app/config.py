from pathlib import Path
from typing import Optional

from pydantic_settings import BaseSettings


class Settings(BaseSettings):
    # Logging Configuration
    LOG_LEVEL: str = "INFO"
    LOG_FORMAT: str = "structured"
    LOG_FILE: Optional[str] = None

    # Report Configuration
    REPORT_SCHEMA_VERSION: int = 1

    # Gradient Check Configuration
    GRADCHECK_EPSILON: float = 1e-5
    GRADCHECK_TOLERANCE: float = 1e-5
    GRADCHECK_INSTANCES: int = 20

    # Ablation Grid Configuration
    GRID_WORKERS: int = 1

    # Benchmark presets shipped with the package
    PRESET_DIR: str = str(Path(__file__).resolve().parent / "presets")

    class Config:
        env_file = ".env"
        env_prefix = "MCRL_"
        case_sensitive = True

# Create settings instance - automatically loads from .env file
settings = Settings()
