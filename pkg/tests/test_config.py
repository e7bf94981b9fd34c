"""
Environment settings and logging setup.
"""

import json
import logging

import pytest
from pydantic import ValidationError

from pencilbench.config import BenchSettings, configure_logging, get_settings, reset_settings


class TestSettings:

    def test_defaults(self):
        settings = BenchSettings()
        assert settings.seed is None and settings.threads is None
        assert settings.log_level == "INFO" and not settings.log_json

    def test_environment(self, monkeypatch):
        monkeypatch.setenv("PENCILBENCH_SEED", "42")
        monkeypatch.setenv("PENCILBENCH_THREADS", "3")
        monkeypatch.setenv("PENCILBENCH_LOG_JSON", "true")
        settings = BenchSettings()
        assert settings.seed == 42 and settings.threads == 3 and settings.log_json

    def test_invalid_seed(self, monkeypatch):
        monkeypatch.setenv("PENCILBENCH_SEED", "-1")
        with pytest.raises(ValidationError):
            BenchSettings()

    def test_cached_until_reset(self, monkeypatch):
        first = get_settings()
        monkeypatch.setenv("PENCILBENCH_SEED", "9")
        assert get_settings() is first
        reset_settings()
        assert get_settings().seed == 9


class TestConfigureLogging:

    def test_text_format(self, capsys):
        configure_logging("DEBUG")
        logging.getLogger("pencilbench.test").info("hello")
        err = capsys.readouterr().err
        assert "pencilbench.test - INFO - hello" in err

    def test_json_format(self, capsys):
        configure_logging("info", json_logs=True)
        logging.getLogger("pencilbench.test").warning("structured")
        record = json.loads(capsys.readouterr().err.strip().splitlines()[-1])
        assert record["message"] == "structured"
        assert record["levelname"] == "WARNING"

    def test_level_filters(self, capsys):
        configure_logging("ERROR")
        logging.getLogger("pencilbench.test").warning("hidden")
        assert "hidden" not in capsys.readouterr().err
