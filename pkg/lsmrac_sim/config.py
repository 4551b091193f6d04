"""
Runtime settings for the lsmrac simulator CLI.

Scenario physics lives in config documents and presets; this module only
holds where outputs and logs go. The OS environment takes precedence over
the .env file, command line flags take precedence over both.
"""

from __future__ import annotations

from dataclasses import dataclass

from dotenv import load_dotenv

from lsmrac.utils import get_env_value

load_dotenv(dotenv_path=".env", override=False)

LOG_LEVELS = ["DEBUG", "INFO", "WARNING", "ERROR", "CRITICAL"]


@dataclass(frozen=True)
class RuntimeSettings:
    out_dir: str
    log_level: str
    log_dir: str | None
    verbose: bool
    steps_override: int | None
    """Horizon override applied to every scenario when set."""

    @classmethod
    def from_env(cls) -> "RuntimeSettings":
        level = get_env_value("LOG_LEVEL", "INFO").upper()
        return cls(
            out_dir=get_env_value("LSMRAC_OUT_DIR", "./out"),
            log_level=level if level in LOG_LEVELS else "INFO",
            log_dir=get_env_value("LOG_DIR", None, special_none=True),
            verbose=get_env_value("VERBOSE", False, bool),
            steps_override=get_env_value("LSMRAC_STEPS", None, int, special_none=True),
        )
