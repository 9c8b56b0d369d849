"""Exception types shared across the package."""

from __future__ import annotations

from typing import Any


class NonConvergenceError(RuntimeError):
    """An iterative or adaptive method missed its accuracy target.

    The ``diagnostics`` attribute carries whatever the failing routine had
    accumulated (iteration history, error estimates) so callers can report
    it instead of losing it.
    """

    def __init__(self, message: str, diagnostics: Any = None) -> None:
        super().__init__(message)
        self.diagnostics = diagnostics


class DomainError(ValueError):
    """Argument outside the supported operating range."""


class PoleError(DomainError):
    """Evaluation at a pole (e.g. the gamma function at a non-positive integer)."""


class DelayViolation(ValueError):
    """A delay descriptor asked for a state from the future (delay(t) > t)."""
