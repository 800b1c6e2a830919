import os
import sys
from typing import Optional

from dotenv import load_dotenv
from loguru import logger
from pydantic import BaseModel

load_dotenv()


class Settings(BaseModel):
    """Logging settings read from the environment.

    Nothing here may change a result: trials, alpha, seed and workers come
    from the experiment config and CLI flags only.
    """

    log_level: str = "WARNING"
    log_file: Optional[str] = None


def load_settings() -> Settings:
    """Build settings from REARRANGE_LOG and REARRANGE_LOG_FILE"""
    return Settings(
        log_level=os.getenv("REARRANGE_LOG", "WARNING").upper(),
        log_file=os.getenv("REARRANGE_LOG_FILE"),
    )


def configure_logging(settings: Optional[Settings] = None) -> None:
    """Route log records to stderr (and optionally a rotating file)"""
    settings = settings or load_settings()
    logger.remove()
    logger.add(sys.stderr, level=settings.log_level)
    if settings.log_file:
        logger.add(settings.log_file, level=settings.log_level,
                   rotation="1 day", retention="7 days")
