"""
Tests for settings loading and logger setup.
"""
import logging

import pytest

from utils.config import Settings, load_settings
from utils.logger import setup_logger


def test_defaults_ignore_environment(monkeypatch):
    monkeypatch.setenv("LOCOPT_GRASP_ITERATIONS", "5")
    assert load_settings(use_env=False).GRASP_ITERATIONS == 32
    assert load_settings().GRASP_ITERATIONS == 5


def test_validate_lists_bad_fields():
    settings = Settings.model_construct(GRASP_RCL_ALPHA=2.0, GRID_ZOOM=0)
    with pytest.raises(ValueError) as exc:
        settings.validate()
    assert "GRASP_RCL_ALPHA" in str(exc.value)
    assert "GRID_ZOOM" in str(exc.value)


def test_setup_logger_is_idempotent():
    logger = setup_logger("INFO")
    handlers = list(logger.handlers)
    again = setup_logger("DEBUG", json_format=True)
    assert again is logger
    assert again.handlers == handlers
    assert again.level == logging.DEBUG
    assert not again.propagate
