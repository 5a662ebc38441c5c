import io
import logging

import pytest
from pydantic import ValidationError

from toeplitz_forge.config import (
    ForgeSettings,
    _instances,
    configure_logging,
    format_validation_error,
    get_settings,
)


def test_settings_defaults():
    settings = ForgeSettings.load(cache=False)
    assert settings.threads == 1
    assert settings.log_level == "WARNING"
    assert settings.chain_ratio == 3
    assert settings.exhaustive_limit <= settings.materialize_limit


def test_environment_overrides(monkeypatch):
    monkeypatch.setenv("TOEPLITZ_FORGE_THREADS", "4")
    monkeypatch.setenv("TOEPLITZ_FORGE_LOG_LEVEL", "debug")
    settings = ForgeSettings.load(cache=False)
    assert settings.threads == 4
    assert settings.log_level == "DEBUG"


def test_env_file_is_read(tmp_path):
    (tmp_path / ".env").write_text("TOEPLITZ_FORGE_MAX_CHAIN_LEVELS=40\n")
    assert ForgeSettings.load(cache=False).max_chain_levels == 40


def test_invalid_values_are_rejected(monkeypatch):
    monkeypatch.setenv("TOEPLITZ_FORGE_THREADS", "0")
    with pytest.raises(ValidationError):
        ForgeSettings.load(cache=False)


def test_even_chain_ratio_is_rejected(monkeypatch):
    monkeypatch.setenv("TOEPLITZ_FORGE_CHAIN_RATIO", "4")
    with pytest.raises(ValidationError):
        ForgeSettings.load(cache=False)


def test_unknown_log_level_is_rejected():
    with pytest.raises(ValidationError):
        ForgeSettings(_env_file=None, log_level="LOUD")


def test_caching():
    first = ForgeSettings.load()
    assert ForgeSettings.load() is first
    assert get_settings() is first
    assert ForgeSettings.load(cache=False) is not first
    assert ForgeSettings.load(threads=2) is not first
    assert _instances[ForgeSettings] is first


def test_reload_reads_new_values_and_notifies(tmp_path):
    env_file = tmp_path / ".env"
    env_file.write_text("TOEPLITZ_FORGE_THREADS=2\n")
    assert ForgeSettings.load().threads == 2

    seen = []
    ForgeSettings.on_reload(lambda s: seen.append(s.threads))
    env_file.write_text("TOEPLITZ_FORGE_THREADS=3\n")
    reloaded = ForgeSettings.reload()

    assert reloaded.threads == 3
    assert seen == [3]
    assert ForgeSettings.load() is reloaded


def test_diagnose_marks_sources(monkeypatch):
    monkeypatch.setenv("TOEPLITZ_FORGE_THREADS", "2")
    monkeypatch.setenv("TOEPLITZ_FORGE_THREAD", "2")
    out = io.StringIO()
    assert ForgeSettings.diagnose(stream=out)
    text = out.getvalue()
    assert "✓ TOEPLITZ_FORGE_THREADS = 2 (environment)" in text
    assert "⚠ TOEPLITZ_FORGE_LOG_LEVEL = WARNING (default)" in text
    assert "TOEPLITZ_FORGE_THREAD is not a known setting" in text
    assert "Did you mean: TOEPLITZ_FORGE_THREADS" in text


def test_diagnose_reports_invalid_environment(monkeypatch):
    monkeypatch.setenv("TOEPLITZ_FORGE_EXHAUSTIVE_LIMIT", "many")
    out = io.StringIO()
    assert not ForgeSettings.diagnose(stream=out)
    assert "TOEPLITZ_FORGE_EXHAUSTIVE_LIMIT" in out.getvalue()


def test_format_validation_error(monkeypatch):
    monkeypatch.setenv("TOEPLITZ_FORGE_THREADS", "-1")
    with pytest.raises(ValidationError) as info:
        ForgeSettings.load(cache=False)
    out = io.StringIO()
    format_validation_error(info.value, stream=out)
    assert "TOEPLITZ_FORGE_THREADS" in out.getvalue()
    assert "Configuration Error" in out.getvalue()


def test_configure_logging_installs_one_handler():
    logger = logging.getLogger("toeplitz_forge")
    configure_logging("INFO")
    count = len(logger.handlers)
    configure_logging("DEBUG")
    assert len(logger.handlers) == count
    assert logger.level == logging.DEBUG
    configure_logging()
    assert logger.level == logging.WARNING
