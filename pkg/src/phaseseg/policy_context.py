from __future__ import annotations

from contextvars import ContextVar, Token
from typing import TYPE_CHECKING, Optional

if TYPE_CHECKING:
    from .policy import NumericPolicy

# None means "use DEFAULT_POLICY"; resolved lazily
_current_policy: ContextVar[Optional[NumericPolicy]] = ContextVar(
    "_current_policy", default=None
)


def _default_policy() -> NumericPolicy:
    from .policy import DEFAULT_POLICY

    return DEFAULT_POLICY


def get_policy() -> Optional[NumericPolicy]:
    """May return None if no ambient policy has been set."""
    return _current_policy.get()


def get_active_policy() -> NumericPolicy:
    """Always returns a policy (falls back to DEFAULT_POLICY if none ambient)."""
    return _current_policy.get() or _default_policy()


class use_policy:
    """Make ``policy`` the ambient numeric policy inside a ``with`` block."""

    def __init__(self, policy: NumericPolicy):
        self._policy = policy
        self._token: Optional[Token[Optional[NumericPolicy]]] = None

    def __enter__(self) -> use_policy:
        self._token = _current_policy.set(self._policy)
        return self

    def __exit__(self, exc_type, exc_val, exc_tb) -> None:
        if self._token is not None:
            _current_policy.reset(self._token)
            self._token = None
        else:
            _current_policy.set(None)
