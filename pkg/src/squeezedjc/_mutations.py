"""Deliberate fault injection used to check that validation catches bugs.

Only the validation harness and tests should touch this. Each mutation is a
named flag that the affected code paths consult at call time.
"""

from __future__ import annotations

import contextlib
import threading

KNOWN = ("sinh_sign", "drop_chi_phase")

_state = threading.local()


def active(name: str) -> bool:
    return name in getattr(_state, "names", ())


def sinh_sign() -> float:
    """Multiplier applied to every sinh(r) in the B-operator family."""
    return -1.0 if active("sinh_sign") else 1.0


@contextlib.contextmanager
def inject(*names: str):
    for name in names:
        if name not in KNOWN:
            raise ValueError(f"unknown mutation {name!r}; known: {', '.join(KNOWN)}")
    prev = getattr(_state, "names", ())
    _state.names = tuple(prev) + tuple(names)
    try:
        yield
    finally:
        _state.names = prev
