from __future__ import annotations

import logging
import logging.handlers
import os
from pathlib import Path
from typing import Any

import numpy as np
from dotenv import load_dotenv

from lsmrac.constants import (
    DEFAULT_LOG_MAX_BYTES,
    DEFAULT_LOG_BACKUP_COUNT,
    DEFAULT_LOG_FILENAME,
)
from lsmrac.exceptions import ContractViolationError

# variables already in the environment win over .env
load_dotenv(dotenv_path=".env", override=False)

_TRUE_STRINGS = frozenset({"1", "true", "yes", "on", "t"})


def get_env_value(
    env_key: str, default: Any, value_type: type = str, special_none: bool = False
) -> Any:
    """
    Read a runtime setting from the environment.

    Args:
        env_key: variable name, e.g. ``LSMRAC_STEPS``
        default: returned when the variable is unset or does not convert
        value_type: ``str``, ``int``, ``float`` or ``bool``
        special_none: map the literal string "None" to ``None``
    """
    raw = os.environ.get(env_key)
    if raw is None:
        return default
    raw = raw.strip()
    if special_none and raw == "None":
        return None
    if value_type is bool:
        return raw.lower() in _TRUE_STRINGS
    try:
        return value_type(raw)
    except (TypeError, ValueError):
        return default


logger = logging.getLogger("lsmrac")
logger.propagate = False
# handlers are attached by the command line runner
logger.setLevel(logging.INFO)

_verbose = get_env_value("VERBOSE", False, bool)


def set_verbose_debug(enabled: bool) -> None:
    global _verbose
    _verbose = bool(enabled)


def verbose_debug(msg: str, *args: Any) -> None:
    """Per-step debug line, cut to 100 characters unless verbose output is on."""
    if not logger.isEnabledFor(logging.DEBUG):
        return
    text = msg % args if args else msg
    logger.debug(text if _verbose or len(text) <= 100 else text[:100] + "...")


def setup_logger(level: str = "INFO", log_dir: str | None = None) -> logging.Logger:
    """Attach a console handler and, when ``log_dir`` is given, a rotating file.

    Calling it again replaces the handlers installed by the previous call.
    """
    logger.setLevel(level)
    for handler in list(logger.handlers):
        logger.removeHandler(handler)
        handler.close()

    console = logging.StreamHandler()
    console.setFormatter(logging.Formatter("%(levelname)s: %(message)s"))
    console.setLevel(level)
    logger.addHandler(console)

    if log_dir is None:
        return logger
    log_path = Path(log_dir).resolve() / DEFAULT_LOG_FILENAME
    try:
        log_path.parent.mkdir(parents=True, exist_ok=True)
        rotating = logging.handlers.RotatingFileHandler(
            log_path,
            maxBytes=get_env_value("LOG_MAX_BYTES", DEFAULT_LOG_MAX_BYTES, int),
            backupCount=get_env_value("LOG_BACKUP_COUNT", DEFAULT_LOG_BACKUP_COUNT, int),
            encoding="utf-8",
        )
    except OSError as e:
        logger.warning(f"Could not open log file {log_path}: {e}; logging to console only")
        return logger
    rotating.setFormatter(logging.Formatter("%(asctime)s - %(name)s - %(levelname)s - %(message)s"))
    rotating.setLevel(level)
    logger.addHandler(rotating)
    return logger


def as_vector(value: Any, size: int, name: str) -> np.ndarray:
    """Return `value` as a float vector of length `size` or raise."""
    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (size,):
        raise ContractViolationError(
            f"{name} must have {size} entries, got shape {np.shape(value)}"
        )
    return arr


def as_rows(value: Any, size: int, name: str) -> np.ndarray:
    """Return `value` as floats whose last axis has `size` entries.

    A single column or scalar of the right size is flattened; stacks of
    shape (..., size) pass through.
    """
    arr = np.asarray(value, dtype=float)
    if arr.shape[-1:] != (size,):
        if arr.size != size:
            raise ContractViolationError(
                f"{name} must end in {size} entries, got shape {arr.shape}"
            )
        arr = arr.reshape(size)
    return arr


def as_matrix(value: Any, rows: int, cols: int, name: str) -> np.ndarray:
    """Return `value` as a float matrix of shape (rows, cols) or raise."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim == 1 and cols == 1:
        arr = arr.reshape(-1, 1)
    if arr.shape != (rows, cols):
        raise ContractViolationError(
            f"{name} must have shape ({rows}, {cols}), got {arr.shape}"
        )
    return arr


def max_abs(value: np.ndarray) -> float:
    """Max absolute entry, the norm used in residual reports."""
    arr = np.asarray(value, dtype=float)
    return float(np.max(np.abs(arr))) if arr.size else 0.0


def symmetrize(matrix: np.ndarray) -> np.ndarray:
    return 0.5 * (matrix + matrix.T)
