"""
settings.py
===========
Runtime configuration and logging setup for every specdb entry point.

Values come from, in increasing priority: defaults, ``<root>/.env``, the
process environment (``SPECDB_*``) and explicit overrides (CLI flags).

Usage:
    from src.config.settings import load_settings, setup_logging
    settings = load_settings(trace=True)
    logger = setup_logging("cli", settings.log_level)
"""

import os
import logging
from typing import Any, Dict, Optional

from dotenv import load_dotenv
from pydantic import BaseModel, Field, field_validator

# ── paths ───────────────────────────────────────────────────────────
ROOT_DIR = os.path.abspath(os.path.join(os.path.dirname(__file__), "..", ".."))
DATA_DIR = os.path.join(ROOT_DIR, "data")
DB_DIR = os.path.join(DATA_DIR, "db")
LOG_DIR = os.path.join(DATA_DIR, "logs")
REPORTS_DIR = os.path.join(DATA_DIR, "reports")
SPECS_DIR = os.path.join(ROOT_DIR, "specs")
SESSIONS_DIR = os.path.join(ROOT_DIR, "sessions")

LOG_FORMAT = "%(asctime)s │ %(levelname)-8s │ %(message)s"
LOG_DATEFMT = "%Y-%m-%d %H:%M:%S"

_TRUE = {"1", "true", "yes", "on"}


class Settings(BaseModel):
    """Validated runtime knobs; invalid values raise pydantic.ValidationError."""

    trace: bool = False
    strategy: str = "default"
    max_choices: int = Field(default=1_000_000, gt=0)
    max_rounds: Optional[int] = Field(default=None, gt=0)
    recursion_limit: int = Field(default=20_000, ge=1_000)
    debug_checks: bool = False
    lock_retries: int = Field(default=3, ge=0)
    lock_base_delay: float = Field(default=0.1, gt=0)
    oracle_max_atoms: int = Field(default=3, gt=0)
    oracle_enumeration_cap: int = Field(default=65_536, gt=0)
    log_level: str = "INFO"

    @field_validator("strategy")
    @classmethod
    def _known_strategy(cls, v: str) -> str:
        if v in ("default", "exhaustive"):
            return v
        if v.startswith("random:") and v[len("random:"):].lstrip("-").isdigit():
            return v
        raise ValueError(f"unknown strategy '{v}' (use default, random:<seed> or exhaustive)")

    @field_validator("log_level")
    @classmethod
    def _known_level(cls, v: str) -> str:
        v = v.upper()
        if v not in ("DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"):
            raise ValueError(f"unknown log level '{v}'")
        return v

    @property
    def random_seed(self) -> Optional[int]:
        if self.strategy.startswith("random:"):
            return int(self.strategy[len("random:"):])
        return None


_ENV_KEYS = {
    "trace": "SPECDB_TRACE",
    "strategy": "SPECDB_STRATEGY",
    "max_choices": "SPECDB_MAX_CHOICES",
    "max_rounds": "SPECDB_MAX_ROUNDS",
    "recursion_limit": "SPECDB_RECURSION_LIMIT",
    "debug_checks": "SPECDB_DEBUG_CHECKS",
    "lock_retries": "SPECDB_LOCK_RETRIES",
    "lock_base_delay": "SPECDB_LOCK_BASE_DELAY",
    "oracle_max_atoms": "SPECDB_ORACLE_MAX_ATOMS",
    "oracle_enumeration_cap": "SPECDB_ORACLE_CAP",
    "log_level": "SPECDB_LOG_LEVEL",
}
_BOOL_KEYS = {"trace", "debug_checks"}


def load_settings(**overrides: Any) -> Settings:
    """Build Settings from .env, the environment, and non-None overrides."""
    load_dotenv(os.path.join(ROOT_DIR, ".env"))
    values: Dict[str, Any] = {}
    for key, env_name in _ENV_KEYS.items():
        raw = os.getenv(env_name)
        if raw is None or raw == "":
            continue
        values[key] = raw.strip().lower() in _TRUE if key in _BOOL_KEYS else raw
    values.update({k: v for k, v in overrides.items() if v is not None})
    return Settings(**values)


def setup_logging(component: str, level: str = "INFO") -> logging.Logger:
    """Install the console + file handlers once and return ``specdb.<component>``."""
    os.makedirs(LOG_DIR, exist_ok=True)
    logging.basicConfig(
        level=getattr(logging, level.upper(), logging.INFO),
        format=LOG_FORMAT,
        datefmt=LOG_DATEFMT,
        handlers=[
            logging.StreamHandler(),
            logging.FileHandler(os.path.join(LOG_DIR, "specdb.log"), encoding="utf-8"),
        ],
    )
    logging.getLogger("specdb").setLevel(getattr(logging, level.upper(), logging.INFO))
    return logging.getLogger(f"specdb.{component}")
