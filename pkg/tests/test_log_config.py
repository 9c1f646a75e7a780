"""Tests for logging configuration and in-memory capture."""

import logging

import pytest

from convexlab.core import log_config


@pytest.fixture(autouse=True)
def restore_root_logger():
    root = logging.getLogger()
    handlers, level = root.handlers[:], root.level
    yield
    log_config.remove_capture_handler()
    for handler in root.handlers[:]:
        root.removeHandler(handler)
        if handler not in handlers:
            handler.close()
    for handler in handlers:
        root.addHandler(handler)
    root.setLevel(level)


def test_capture_handler_keeps_tail():
    handler = log_config.add_capture_handler(max_records=3)
    log = logging.getLogger('capture-test')
    log.setLevel(logging.INFO)
    for k in range(5):
        log.info(f"record {k}")
    tail = handler.tail(2)
    assert len(tail) == 2
    assert tail[-1].endswith("record 4")
    assert len(handler.records) == 3


def test_configure_logging_keeps_capture_handler():
    handler = log_config.add_capture_handler()
    log_config.configure_logging(level=logging.WARNING)
    root = logging.getLogger()
    assert handler in root.handlers
    assert sum(isinstance(h, log_config.ListHandler) for h in root.handlers) == 1
    log_config.remove_capture_handler()
    assert not any(isinstance(h, log_config.ListHandler) for h in root.handlers)


def test_file_logging(tmp_path):
    path = tmp_path / "logs" / "lab.log"
    log_config.configure_logging(level=logging.INFO, log_to_file=True, log_file_path=str(path))
    logging.getLogger('file-test').info("written to file")
    for handler in logging.getLogger().handlers:
        handler.flush()
    assert "written to file" in path.read_text()
