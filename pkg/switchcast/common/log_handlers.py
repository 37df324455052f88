"""
Log Handlers

This module contains utility functions to set up logging
consistently
"""

import logging
import sys

from switchcast import config

BANNER_WIDTH = 70


def init_logging(logger_name: str = config.LOGGER_NAME, level: str = config.LOG_LEVEL) -> logging.Logger:
    """Set up logging for command-line runs"""
    logger = logging.getLogger(logger_name)
    logger.propagate = False
    logger.setLevel(level.upper())
    # Make all log formats consistent
    formatter = logging.Formatter(
        "[%(asctime)s] [%(levelname)s] [%(module)s] %(message)s", "%Y-%m-%d %H:%M:%S %z"
    )
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(formatter)
    logger.handlers = [handler]
    logger.info("Logging handler established")
    return logger


def log_banner(logger: logging.Logger, title: str):
    """Logs a centered, letter-spaced title between two rules of stars"""
    spaced = "  " + " ".join(title.upper()) + "  "
    logger.info(BANNER_WIDTH * "*")
    logger.info(spaced.center(BANNER_WIDTH, "*"))
    logger.info(BANNER_WIDTH * "*")
