"""Shared error types and divergence flags.

Divergent quantities are never encoded as float('inf') or NaN inside
arrays; they travel as Divergence flags (value objects) or typed
exceptions so downstream code can report growth laws instead of garbage.
"""

from __future__ import annotations

from dataclasses import dataclass


class DomainError(ValueError):
    """Input outside the mathematical domain of an operation."""


class ConvergenceError(RuntimeError):
    """An iterative scheme failed to converge; message carries diagnostics."""


class ToleranceNotMet(RuntimeWarning):
    """Best-effort result returned, requested tolerance not certified."""


class DivergenceError(RuntimeError):
    """Raised when a caller demands a number for a divergent quantity."""


class SolvabilityError(RuntimeError):
    """A singular linear system's right-hand side fell outside its range.

    The perturbative solvers rely on trace preservation of the generators
    to make their singular population systems consistent, so this error
    almost always points at an assembly bug upstream, not at bad data.
    """


@dataclass(frozen=True)
class Divergence:
    """Flag for a quantity that diverges, with its leading growth law.

    exponent is the power p in |value(t)| ~ t**p (p = 0 marks a
    logarithmic divergence, recorded in note).
    """

    exponent: float
    note: str = ""

    def __float__(self):  # pragma: no cover - guard, not a code path
        raise DivergenceError(f"divergent quantity used as a number: {self}")
