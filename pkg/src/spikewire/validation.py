"""Input-validation helpers shared across the package."""

from __future__ import annotations

import numpy as np


def as_float_matrix(x, name: str, copy: bool = False) -> np.ndarray:
    """Coerce to a finite 2-D float64 array (owned copy on request)."""
    a = np.array(x, dtype=np.float64) if copy else np.asarray(x, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError(f"{name} contains non-finite entries")
    return a


def check_observation(obs, n: int) -> np.ndarray:
    """Validate an observation vector of expected length ``n``."""
    a = np.asarray(obs, dtype=np.float64)
    if a.shape != (n,):
        raise ValueError(f"observation must have shape ({n},), got {a.shape}")
    if not np.all(np.isfinite(a)):
        raise ValueError("observation contains non-finite entries")
    return a


def check_positive_int(value, name: str) -> int:
    v = int(value)
    if v < 1:
        raise ValueError(f"{name} must be >= 1, got {value}")
    return v


def check_unit_interval(value, name: str, *, open_low: bool = False) -> float:
    v = float(value)
    low_ok = v > 0.0 if open_low else v >= 0.0
    if not (low_ok and v <= 1.0):
        raise ValueError(f"{name} must lie in (0, 1], got {value}")
    return v
