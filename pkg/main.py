"""
MTLRRC - multi-task learning via robust regularized clustering

This is the main entry point for the command-line interface.
"""

import sys

from app.cli import main
from app.core.config import settings
from app.core.logging import logger

if __name__ == "__main__":
    logger.debug(f"Starting {settings.APP_NAME} {settings.APP_VERSION}")
    sys.exit(main())
