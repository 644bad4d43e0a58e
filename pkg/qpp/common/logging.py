"""Logging configuration for the QPP toolkit."""

import os
import sys
from loguru import logger

from qpp.constants import LOGGING_LEVEL_ENV

# Configure logger with WARNING level by default
logger.remove()  # Remove default handler
logger.add(
    sys.stderr,
    level=os.getenv(LOGGING_LEVEL_ENV, "WARNING"),
)


def set_level(level: str) -> None:
    """Re-install the stderr sink at `level` (used by `qpp --debug`)."""
    logger.remove()
    logger.add(sys.stderr, level=level)


__all__ = ["logger", "set_level"]
