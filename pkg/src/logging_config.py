"""
Logging setup: one colorlog handler on the package root logger.
"""

import logging
import sys

import colorlog

ROOT_LOGGER = "src"

_FORMAT = "%(log_color)s%(levelname)-8s%(reset)s %(cyan)s%(name)s%(reset)s %(message)s"
_PLAIN_FORMAT = "%(levelname)-8s %(name)s %(message)s"


def setup_logging(level: str = "INFO", colored: bool = True) -> logging.Logger:
    """
    Install a single stderr handler on the package logger.

    Calling this twice replaces the previous handler instead of stacking them.
    """
    logger = logging.getLogger(ROOT_LOGGER)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)

    handler = colorlog.StreamHandler(sys.stderr)
    if colored:
        handler.setFormatter(colorlog.ColoredFormatter(
            _FORMAT,
            log_colors={
                "DEBUG": "white",
                "INFO": "green",
                "WARNING": "yellow",
                "ERROR": "red",
                "CRITICAL": "bold_red",
            },
        ))
    else:
        handler.setFormatter(logging.Formatter(_PLAIN_FORMAT))

    logger.addHandler(handler)
    logger.setLevel(level.upper())
    logger.propagate = False
    return logger
