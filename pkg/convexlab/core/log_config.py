#!/usr/bin/env python3

"""
Centralized logging configuration for ConvexLab.
Provides functions to consistently configure the logging system
throughout the application, including in-memory capture of records
for run summaries.

Part of the ConvexLab project.
"""

import logging
import os
from collections import deque
from logging.handlers import RotatingFileHandler
from typing import Deque, List, Optional

LOG_FORMAT = '%(asctime)s - %(name)s - %(levelname)s - %(message)s'

# Global variable to track the capture handler
capture_handler = None


def configure_logging(
        level: int = logging.INFO,
        log_to_file: bool = False,
        log_file_path: Optional[str] = None,
        max_log_files: int = 5,
        max_log_size_mb: int = 10
) -> None:
    """
    Configure the logging system for the entire application.

    Args:
        level: Logging level for console (default INFO)
        log_to_file: Whether to save logs to a file
        log_file_path: Path to log file (optional)
        max_log_files: Maximum number of log files for rotation
        max_log_size_mb: Maximum size of log file in MB
    """
    root_logger = logging.getLogger()

    # Keep capture handlers, drop everything else
    kept_handlers = []
    for handler in root_logger.handlers[:]:
        if isinstance(handler, ListHandler):
            kept_handlers.append(handler)
        root_logger.removeHandler(handler)

    root_logger.setLevel(min(level, logging.INFO))

    formatter = logging.Formatter(LOG_FORMAT)

    console_handler = logging.StreamHandler()
    console_handler.setLevel(level)
    console_handler.setFormatter(formatter)
    root_logger.addHandler(console_handler)

    if log_to_file and log_file_path:
        try:
            directory = os.path.dirname(log_file_path)
            if directory:
                os.makedirs(directory, exist_ok=True)

            file_handler = RotatingFileHandler(
                log_file_path,
                maxBytes=max_log_size_mb * 1024 * 1024,
                backupCount=max_log_files
            )
            file_handler.setLevel(level)
            file_handler.setFormatter(formatter)
            root_logger.addHandler(file_handler)

            logging.info(f"Logging to file: {log_file_path}")
        except OSError as e:
            logging.error(f"Error setting up file logging: {e}")

    for handler in kept_handlers:
        root_logger.addHandler(handler)

    logging.debug(f"Logging system initialized: console={logging.getLevelName(level)}")


class ListHandler(logging.Handler):
    """Keeps the most recent formatted records in memory."""

    def __init__(self, max_records: int = 1000, level: int = logging.INFO):
        super().__init__(level)
        self.records: Deque[str] = deque(maxlen=max_records)
        self.setFormatter(logging.Formatter(LOG_FORMAT))

    def emit(self, record: logging.LogRecord) -> None:
        try:
            self.records.append(self.format(record))
        except (TypeError, ValueError):
            self.handleError(record)

    def tail(self, count: int = 20) -> List[str]:
        """Return the last ``count`` formatted records."""
        return list(self.records)[-count:]


def add_capture_handler(max_records: int = 1000) -> ListHandler:
    """
    Attach an in-memory handler to the root logger.

    Args:
        max_records: Number of records retained

    Returns:
        The created handler
    """
    global capture_handler

    root_logger = logging.getLogger()
    for h in list(root_logger.handlers):
        if isinstance(h, ListHandler):
            root_logger.removeHandler(h)

    handler = ListHandler(max_records=max_records)
    root_logger.addHandler(handler)
    capture_handler = handler
    return handler


def remove_capture_handler() -> None:
    """Remove the capture handler from the root logger."""
    global capture_handler

    root_logger = logging.getLogger()
    if capture_handler:
        root_logger.removeHandler(capture_handler)
        capture_handler = None

    for handler in root_logger.handlers[:]:
        if isinstance(handler, ListHandler):
            root_logger.removeHandler(handler)
