import os
from functools import lru_cache
from pydantic_settings import BaseSettings, SettingsConfigDict

class Settings(BaseSettings):
    # Base configuration
    APP_NAME: str = "fatesim"
    DEBUG: bool = False

    # Logging configuration
    LOG_LEVEL: str = "INFO"
    LOG_DIR: str = "logs"
    LOG_TO_FILE: bool = True

    # Environment-specific settings (for dynamic behavior)
    ENVIRONMENT: str = "development"  # Default to development

    # Output configuration
    DEFAULT_OUT_DIR: str = "results"
    FATESIM_OUT: str = ""  # Overrides the output directory of every command when set

    # Runner configuration
    WORKERS: int = 1

    # Study protocol defaults
    DEFAULT_STEPS: int = 4000
    DEFAULT_EPISODE_LENGTH: int = 250
    DEFAULT_REPETITIONS: int = 30
    SWEEP_REPETITIONS: int = 60
    DESK_SCALE_REPETITIONS: int = 10
    BASE_SEED: int = 0
    ALPHA: float = 0.05

    model_config = SettingsConfigDict(
        env_file=".env",  # Single .env file for all environments
        case_sensitive=True,
        extra="ignore",  # Allow extra env vars not defined in Settings
    )

@lru_cache()
def get_settings():
    """
    Function to load settings based on the environment from the `.env` file.
    """
    settings = Settings()  # Load the settings from the .env file

    # Adjust settings dynamically based on the environment
    if settings.ENVIRONMENT.lower() == "production":
        settings.DEBUG = False
        settings.LOG_LEVEL = "INFO"
        settings.WORKERS = max(settings.WORKERS, os.cpu_count() or 1)
    else:
        settings.DEBUG = True
        settings.LOG_LEVEL = "DEBUG"

    return settings

# Create a settings instance
settings = get_settings()
