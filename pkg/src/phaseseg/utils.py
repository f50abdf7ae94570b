"""Array coercion helpers."""

from __future__ import annotations

from typing import Optional

import numpy as np
from numpy.typing import ArrayLike

from .exceptions import ValidationError


def as_vector(value: ArrayLike, name: str, length: Optional[int] = None) -> np.ndarray:
    """
    Coerce ``value`` to a finite 1-D float array.

    Raises:
        ValidationError: If the value is not 1-D, has the wrong length or holds
            NaN/Inf.
    """
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 1:
        raise ValidationError(f"{name} must be a vector, got shape {arr.shape}")
    if length is not None and arr.shape[0] != length:
        raise ValidationError(f"{name} must have length {length}, got {arr.shape[0]}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def as_matrix(
    value: ArrayLike, name: str, shape: Optional[tuple[int, int]] = None
) -> np.ndarray:
    """Coerce ``value`` to a finite 2-D float array of the given shape."""
    arr = np.asarray(value, dtype=float)
    if arr.ndim != 2:
        raise ValidationError(f"{name} must be a matrix, got shape {arr.shape}")
    if shape is not None and arr.shape != shape:
        raise ValidationError(f"{name} must have shape {shape}, got {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise ValidationError(f"{name} contains non-finite values")
    return arr


def frozen(arr: np.ndarray) -> np.ndarray:
    """Return a read-only copy of ``arr``."""
    out = np.array(arr, dtype=float, copy=True)
    out.setflags(write=False)
    return out


def unit(vec: ArrayLike, name: str = "vector") -> np.ndarray:
    """Normalise ``vec`` to unit length."""
    arr = as_vector(vec, name)
    norm = float(np.linalg.norm(arr))
    if norm == 0.0:
        raise ValidationError(f"{name} must be non-zero")
    return arr / norm
