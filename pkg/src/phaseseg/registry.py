"""Registry of transition-feature functions.

A feature function maps a block of states (K×m) and interaction vectors (K×d)
to the K×d_phi matrix of transition features. The last feature column must be
the constant 1 so that sticky initialisation has a bias component to act on.
"""

from __future__ import annotations

from collections.abc import Mapping
from threading import RLock
from typing import Any, Callable

import numpy as np

from .exceptions import ValidationError

FeatureFunction = Callable[[np.ndarray, np.ndarray, Mapping[str, Any]], np.ndarray]

# Global registry storage (protected by _LOCK)
_registry: dict[str, FeatureFunction] = {}
_LOCK = RLock()


def feature_fn(name: str) -> Callable[[FeatureFunction], FeatureFunction]:
    """
    Decorator to register a transition-feature function.

    Args:
        name: Unique name, stored in model files as the ``feature_fn`` id.

    Raises:
        ValidationError: If the name is empty or already registered.
    """
    if not isinstance(name, str) or not name.strip():
        raise ValidationError("Feature function name must be a non-empty string.")

    def decorator(fn: FeatureFunction) -> FeatureFunction:
        with _LOCK:
            if name in _registry:
                raise ValidationError(f"Feature function '{name}' already registered")
            _registry[name] = fn
        fn._feature_name = name
        return fn

    return decorator


def get(name: str) -> FeatureFunction:
    """Get a registered feature function by name."""
    with _LOCK:
        try:
            return _registry[name]
        except KeyError as e:
            raise KeyError(f"Feature function '{name}' not found in registry") from e


def is_registered(name: str) -> bool:
    """Check if a feature function is registered."""
    with _LOCK:
        return name in _registry


def list_feature_fns() -> list[str]:
    """Names of all registered feature functions, sorted."""
    with _LOCK:
        return sorted(_registry)


def unregister(name: str) -> None:
    """Remove a feature function from the registry."""
    with _LOCK:
        _registry.pop(name, None)


def apply(
    name: str,
    states: np.ndarray,
    interactions: np.ndarray,
    params: Mapping[str, Any],
) -> np.ndarray:
    """
    Evaluate feature function ``name`` and check its output contract.

    Raises:
        ValidationError: If the output has the wrong number of rows, is not finite
            or does not end in a constant-one column.
    """
    out = np.asarray(get(name)(states, interactions, params), dtype=float)
    if out.ndim != 2 or out.shape[0] != states.shape[0]:
        raise ValidationError(
            f"Feature function '{name}' returned shape {out.shape}, "
            f"expected ({states.shape[0]}, d_phi)"
        )
    if not np.all(np.isfinite(out)):
        raise ValidationError(f"Feature function '{name}' returned non-finite values")
    if out.shape[1] == 0 or not np.all(out[:, -1] == 1.0):
        raise ValidationError(
            f"Feature function '{name}' must end in a constant-one column"
        )
    return out
