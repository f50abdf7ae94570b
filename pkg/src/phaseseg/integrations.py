from __future__ import annotations

import logging
from importlib.metadata import entry_points
from typing import Optional

logger = logging.getLogger(__name__)

FEATURE_GROUP = "phaseseg.features"


def _load_entry_points(group: str):
    eps = entry_points()
    select = getattr(eps, "select", None)
    if callable(select):
        return select(group=group)
    return eps.get(group, [])


def load_plugins(group: Optional[str] = None) -> int:
    """
    Load third-party feature functions advertised under an entry-point group.

    Each entry point resolves to an object (or a class, which is instantiated)
    exposing ``register_all(register=...)``; ``register`` is
    :func:`phaseseg.registry.feature_fn`. Broken plugins are logged and skipped.

    Returns:
        Number of plugins processed successfully.
    """
    from .registry import feature_fn

    processed = 0
    for ep in _load_entry_points(group or FEATURE_GROUP):
        try:
            obj = ep.load()
            collection = obj() if isinstance(obj, type) else obj
            register_all = getattr(collection, "register_all", None)
            if not callable(register_all):
                logger.warning("Plugin %s has no register_all(); skipped", ep.name)
                continue
            register_all(register=feature_fn)
            processed += 1
        except Exception:
            logger.exception("Failed to load feature plugin %s", ep.name)
            continue
    return processed
