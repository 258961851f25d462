"""
Logging configuration for MTLRRC.

Run-level loggers (CLI, grid search, benchmark) follow ``LOG_LEVEL``. The solver
loggers report every fit of a grid point and every Newton, FISTA and clustering
sweep; they follow ``SOLVER_LOG_LEVEL``.
"""

import logging
import sys
from typing import Optional

from app.core.config import settings

LOG_FORMAT = "%(asctime)s - %(threadName)s - %(name)s - %(levelname)s - %(message)s"
LOG_DATE_FORMAT = "%Y-%m-%d %H:%M:%S"

SOLVER_LOGGERS = (
    "mtlrrc.FusedCentroidEngine",
    "mtlrrc.MTLRRCSolver",
    "app.services.glm",
    "app.services.clustering",
    "app.models.penalty",
)


def _level(name: str) -> int:
    return getattr(logging, name.upper(), logging.INFO)


def setup_logging(log_level: Optional[str] = None, solver_level: Optional[str] = None) -> logging.Logger:
    """
    Route all records to stderr and set the run and solver levels.

    Args:
        log_level: level of the run loggers, ``settings.LOG_LEVEL`` when omitted
        solver_level: level of the per-iteration solver loggers, ``settings.SOLVER_LOG_LEVEL``
            when omitted

    Returns:
        The ``mtlrrc`` logger
    """
    level = _level(log_level or settings.LOG_LEVEL)
    inner = _level(solver_level or settings.SOLVER_LOG_LEVEL)

    root_logger = logging.getLogger()
    root_logger.setLevel(level)
    for handler in root_logger.handlers[:]:
        root_logger.removeHandler(handler)

    # stdout is reserved for the JSON run summary
    console_handler = logging.StreamHandler(sys.stderr)
    console_handler.setLevel(min(level, inner))
    console_handler.setFormatter(logging.Formatter(LOG_FORMAT, datefmt=LOG_DATE_FORMAT))
    root_logger.addHandler(console_handler)

    for name in SOLVER_LOGGERS:
        logging.getLogger(name).setLevel(inner)

    return logging.getLogger("mtlrrc")


logger = setup_logging()
