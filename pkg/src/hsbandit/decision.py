"""Shared decision record and simplex sampling for all bandit algorithms."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DomainError, ProtocolError


@dataclass
class ArmDecision:
    """One selection: the sampled arm, the cell it was made in, the simplex."""

    arm: int
    cell: int
    simplex: np.ndarray

    @property
    def chosen_probability(self) -> float:
        return float(self.simplex[self.arm])


def sample_arm(simplex, rng) -> int:
    """Inverse-CDF draw over arms in index order; the last arm absorbs rounding."""
    u = rng.random()
    acc = 0.0
    last = len(simplex) - 1
    for m, p in enumerate(simplex):
        acc += p
        if u < acc:
            return m
    return last


def check_loss(loss) -> float:
    loss = float(loss)
    if not 0.0 <= loss <= 1.0:
        raise DomainError(f"loss must lie in [0,1], got {loss}")
    return loss


class AlternationGuard:
    """Enforces the strict select -> update -> select ... protocol.

    A fresh select supersedes any unconsumed decision (needed by replay
    evaluation, which discards unmatched rounds); update only ever accepts the
    most recent decision, exactly once.
    """

    def __init__(self):
        self._pending = None

    def _issue(self, decision):
        self._pending = decision
        return decision

    def _consume(self, decision):
        if decision is None or decision is not self._pending:
            raise ProtocolError(
                "update requires the decision returned by the immediately "
                "preceding select call, exactly once"
            )
        self._pending = None
