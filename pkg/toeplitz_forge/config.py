"""Settings for toeplitz_forge, read from TOEPLITZ_FORGE_* variables and .env."""

import logging
import os
import sys
from difflib import get_close_matches
from threading import RLock
from typing import Callable, Dict, List, Optional

from pydantic import Field, ValidationError, field_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

ENV_PREFIX = "TOEPLITZ_FORGE_"

# Module-level state keyed by settings class; class attributes would become pydantic fields
_instances: Dict[type, "ForgeSettings"] = {}
_locks: Dict[type, RLock] = {}
_reload_callbacks: Dict[type, List[Callable]] = {}
_logging_configured = False

_LEVELS = ("CRITICAL", "ERROR", "WARNING", "INFO", "DEBUG")


class ForgeSettings(BaseSettings):
    """Runtime knobs for construction and verification, read from the environment"""

    model_config = SettingsConfigDict(
        env_prefix=ENV_PREFIX,
        env_file=".env",
        env_file_encoding="utf-8",
        extra="ignore",
        case_sensitive=False,
    )

    threads: int = Field(1, ge=1, description="Worker threads for verification scans")
    log_level: str = Field("WARNING", description="Logging level for library messages")
    materialize_limit: int = Field(
        250_000, ge=1, description="Largest domain whose block patterns are stored point by point"
    )
    exhaustive_limit: int = Field(
        100_000, ge=1, description="Largest domain scanned exhaustively for aperiodicity"
    )
    max_chain_levels: int = Field(96, ge=2, description="Ceiling when deepening a default chain")
    chain_ratio: int = Field(3, ge=3, description="Odd per-coordinate ratio of default chains")

    @field_validator("log_level")
    @classmethod
    def validate_level(cls, v: str) -> str:
        v = v.upper()
        if v not in _LEVELS:
            raise ValueError(f"Must be one of {', '.join(_LEVELS)}")
        return v

    @field_validator("chain_ratio")
    @classmethod
    def validate_ratio(cls, v: int) -> int:
        if v % 2 == 0:
            raise ValueError("Default chain ratio must be odd so centered boxes stay exact")
        return v

    @classmethod
    def _get_lock(cls) -> RLock:
        if cls not in _locks:
            _locks[cls] = RLock()
        return _locks[cls]

    @classmethod
    def _get_callbacks(cls) -> List[Callable]:
        if cls not in _reload_callbacks:
            _reload_callbacks[cls] = []
        return _reload_callbacks[cls]

    @classmethod
    def load(cls, cache: bool = True, **overrides) -> "ForgeSettings":
        """Load settings from environment and .env, cached per class"""
        if cache and not overrides and cls in _instances:
            return _instances[cls]
        with cls._get_lock():
            instance = cls(**overrides)
            if cache and not overrides:
                _instances[cls] = instance
            return instance

    @classmethod
    def reload(cls) -> "ForgeSettings":
        """Drop the cached instance, load again and notify callbacks"""
        with cls._get_lock():
            _instances.pop(cls, None)
            instance = cls.load(cache=True)
            for callback in cls._get_callbacks():
                callback(instance)
            return instance

    @classmethod
    def on_reload(cls, callback: Callable[["ForgeSettings"], None]) -> None:
        cls._get_callbacks().append(callback)

    @classmethod
    def diagnose(cls, stream=None) -> bool:
        """Print where each setting comes from; False when the environment is invalid"""
        stream = stream or sys.stdout
        print("\n🔍 Settings Diagnosis:\n", file=stream)
        env_vars = {k.upper(): v for k, v in os.environ.items()}
        try:
            instance = cls.load(cache=False)
        except ValidationError as e:
            format_validation_error(e, stream=stream)
            return False
        for field_name, field_info in cls.model_fields.items():
            env_name = f"{ENV_PREFIX}{field_name.upper()}"
            value = getattr(instance, field_name)
            if env_name in env_vars:
                print(f"  ✓ {env_name} = {value} (environment)", file=stream)
            else:
                print(f"  ⚠ {env_name} = {value} (default)", file=stream)
        known = {f"{ENV_PREFIX}{name.upper()}" for name in cls.model_fields}
        for name in sorted(k for k in env_vars if k.startswith(ENV_PREFIX) and k not in known):
            print(f"  ❓ {name} is not a known setting", file=stream)
            suggestions = get_close_matches(name, sorted(known), n=3, cutoff=0.6)
            if suggestions:
                print(f"    💡 Did you mean: {', '.join(suggestions)}?", file=stream)
        print(file=stream)
        return True


def format_validation_error(error: ValidationError, stream=None) -> None:
    """Explain a settings validation error field by field"""
    stream = stream or sys.stderr
    valid = [f"{ENV_PREFIX}{name.upper()}" for name in ForgeSettings.model_fields]
    print("\n❌ Configuration Error:\n", file=stream)
    for err in error.errors():
        field = str(err["loc"][0]) if err["loc"] else "?"
        env_name = f"{ENV_PREFIX}{field.upper()}"
        print(f"  • {env_name}: {err['msg']}", file=stream)
        if "int" in err["type"] or "greater_than" in err["type"]:
            print(f"    → {env_name} must be a positive integer", file=stream)
        elif err["type"] == "extra_forbidden":
            suggestions = get_close_matches(env_name, valid, n=3, cutoff=0.6)
            if suggestions:
                print(f"    💡 Did you mean: {', '.join(suggestions)}?", file=stream)
    print(file=stream)


def configure_logging(level: Optional[str] = None) -> None:
    """Install one stderr handler on the package logger"""
    global _logging_configured
    root = logging.getLogger("toeplitz_forge")
    root.setLevel(getattr(logging, (level or "WARNING").upper(), logging.WARNING))
    if _logging_configured:
        return
    handler = logging.StreamHandler(sys.stderr)
    handler.setFormatter(logging.Formatter("%(levelname)s %(name)s: %(message)s"))
    root.addHandler(handler)
    _logging_configured = True


def get_settings() -> ForgeSettings:
    return ForgeSettings.load()
