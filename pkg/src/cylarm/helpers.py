"""Collection of helper functions."""

from __future__ import annotations

import logging
import math
from typing import TYPE_CHECKING, Any

import numpy as np

from cylarm.const import N_JOINTS
from cylarm.exceptions import InvalidConfig

if TYPE_CHECKING:
    from numpy.typing import ArrayLike, NDArray

LOG: logging.Logger = logging.getLogger(__name__)


def as_vector(value: ArrayLike, size: int = N_JOINTS) -> NDArray[np.float64]:
    """Return ``value`` as a float vector of ``size`` entries."""

    arr = np.asarray(value, dtype=float).reshape(-1)
    if arr.shape != (size,):
        msg = f"expected {size} values, got {arr.size}"
        raise ValueError(msg)
    return arr


def format_float(value: float) -> str:
    """Shortest decimal that parses back to the same double."""

    return repr(float(value))


def read_vector(
    raw: Any,
    key_path: str,
    *,
    size: int = N_JOINTS,
    positive: bool = False,
    non_negative: bool = False,
) -> tuple[float, ...]:
    """Parse a config list of numbers, broadcasting a scalar to every joint."""

    if isinstance(raw, bool):
        raise InvalidConfig(key_path, "expected a number or a list of numbers")
    if isinstance(raw, (int, float)):
        raw = [raw] * size
    if not isinstance(raw, list) or len(raw) != size:
        raise InvalidConfig(key_path, f"expected a list of {size} numbers")

    values = tuple(read_number(item, f"{key_path}[{i}]") for i, item in enumerate(raw))
    if positive and min(values) <= 0:
        raise InvalidConfig(key_path, "every entry must be > 0")
    if non_negative and min(values) < 0:
        raise InvalidConfig(key_path, "every entry must be >= 0")
    return values


def read_number(
    raw: Any,
    key_path: str,
    *,
    positive: bool = False,
    non_negative: bool = False,
) -> float:
    """Parse a finite config number."""

    if isinstance(raw, bool) or not isinstance(raw, (int, float)):
        raise InvalidConfig(key_path, f"expected a number, got {raw!r}")
    value = float(raw)
    if not math.isfinite(value):
        raise InvalidConfig(key_path, "must be finite")
    if positive and value <= 0:
        raise InvalidConfig(key_path, f"must be > 0, got {value!r}")
    if non_negative and value < 0:
        raise InvalidConfig(key_path, f"must be >= 0, got {value!r}")
    return value


def read_block(raw: Any, key_path: str, allowed: set[str]) -> dict[str, Any]:
    """Return ``raw`` as a mapping after rejecting keys outside ``allowed``."""

    if raw is None:
        return {}
    if not isinstance(raw, dict):
        raise InvalidConfig(key_path or "<root>", "expected an object")

    for key in sorted(raw):
        if key not in allowed:
            LOG.debug("Rejecting unknown config key %s.%s", key_path, key)
            raise InvalidConfig(
                f"{key_path}.{key}" if key_path else key,
                f"unknown key (allowed: {', '.join(sorted(allowed))})",
            )
    return raw
