"""
Centralized logging configuration for locopt.
"""

import logging
import sys

JSON_FORMAT = '{"time": "%(asctime)s", "level": "%(levelname)s", "message": "%(message)s", "event": "%(name)s"}'
PLAIN_FORMAT = "%(asctime)s [%(levelname)s] %(name)s: %(message)s"


def setup_logger(level="WARNING", json_format=False):
    """Configure the `locopt` logger once; later calls only adjust the level.

    Output goes to stderr so solver results on stdout stay reproducible.
    """
    logger = logging.getLogger("locopt")
    if not getattr(logger, "_locopt_configured", False):
        handler = logging.StreamHandler(sys.stderr)
        handler.setFormatter(logging.Formatter(JSON_FORMAT if json_format else PLAIN_FORMAT))
        logger.addHandler(handler)
        logger.propagate = False
        logger._locopt_configured = True
    logger.setLevel(level.upper() if isinstance(level, str) else level)
    return logger
