import os

import pytest

from toeplitz_forge.choquet import SimplexSpec
from toeplitz_forge.config import ENV_PREFIX, ForgeSettings, _instances, _reload_callbacks
from toeplitz_forge.pipeline import realize_simplex, worked_example


@pytest.fixture(autouse=True)
def clean_settings(tmp_path, monkeypatch):
    # no stray .env or TOEPLITZ_FORGE_* variables leak into a test
    monkeypatch.chdir(tmp_path)
    for key in list(os.environ):
        if key.upper().startswith(ENV_PREFIX):
            monkeypatch.delenv(key)
    _instances.pop(ForgeSettings, None)
    _reload_callbacks.pop(ForgeSettings, None)
    yield
    _instances.pop(ForgeSettings, None)
    _reload_callbacks.pop(ForgeSettings, None)


@pytest.fixture(scope="session")
def settings():
    return ForgeSettings(_env_file=None)


@pytest.fixture(scope="session")
def example_z(settings):
    """Worked example on Z with q_n = 9^(n+1), three levels"""
    return worked_example(1, 3, settings=settings)


@pytest.fixture(scope="session")
def example_z4(settings):
    return worked_example(1, 4, settings=settings)


@pytest.fixture(scope="session")
def example_z2(settings):
    """Worked example on Z^2 with q_n = 3 * 9^n per coordinate"""
    return worked_example(2, 2, settings=settings)


@pytest.fixture(scope="session")
def realized(settings):
    """Two extreme points on Z, four stages"""
    return realize_simplex(SimplexSpec.finite(2), 1, 4, settings=settings)
