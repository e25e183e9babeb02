"""Exception and warning types shared across the package."""

from __future__ import annotations


class SqueezedJCError(Exception):
    """Base class for package errors."""


class DomainError(SqueezedJCError, ValueError):
    """An argument lies outside the domain of a function."""


class ConfigError(SqueezedJCError, ValueError):
    """A run configuration is malformed or violates an invariant."""


class ConvergenceError(SqueezedJCError):
    """A series failed to meet its stopping rule.

    ``diagnostics`` carries whatever partial information the caller had
    (terms used, tail estimate, partial value, offending index).
    """

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class TruncationError(SqueezedJCError):
    """A truncated Fock representation could not contain the state."""

    def __init__(self, message: str, **diagnostics):
        super().__init__(message)
        self.diagnostics = diagnostics


class TruncationWarning(UserWarning):
    """Truncation edge effects exceed the certification tolerance."""
