"""
Logging Setup
Console (and optional rotating file) handlers with either the plain
"time - name - level - message" layout or JSON records.
"""

import logging
import sys
from logging.handlers import RotatingFileHandler
from typing import Optional

from pythonjsonlogger import jsonlogger

LOG_FORMAT = "%(asctime)s - %(name)s - %(levelname)s - %(message)s"


def _formatter(json_logs: bool) -> logging.Formatter:
    if json_logs:
        return jsonlogger.JsonFormatter(LOG_FORMAT)
    return logging.Formatter(LOG_FORMAT)


def configure_logging(settings, json_logs: bool = False, level: Optional[str] = None) -> logging.Logger:
    """
    Configure the root logger.

    Args:
        settings: Config class (LOG_LEVEL, LOG_FILE, LOG_JSON, LOG_MAX_BYTES,
            LOG_BACKUP_COUNT)
        json_logs: Force JSON records
        level: Override of settings.LOG_LEVEL

    Returns:
        The root logger
    """
    json_logs = json_logs or settings.LOG_JSON
    root = logging.getLogger()
    root.setLevel(getattr(logging, (level or settings.LOG_LEVEL).upper(), logging.INFO))

    for handler in list(root.handlers):
        root.removeHandler(handler)

    console = logging.StreamHandler(sys.stderr)
    console.setFormatter(_formatter(json_logs))
    root.addHandler(console)

    if settings.LOG_FILE:
        file_handler = RotatingFileHandler(
            settings.LOG_FILE,
            maxBytes=settings.LOG_MAX_BYTES,
            backupCount=settings.LOG_BACKUP_COUNT,
        )
        file_handler.setFormatter(_formatter(json_logs))
        root.addHandler(file_handler)

    return root
