"""Synthetic loss environments, logged interaction streams, and replay.

The sinusoidal model draws a scalar context s uniformly from [0,1] and gives
three arms Bernoulli losses with means

    arm 0: 0.5 + 0.5*sin(2*pi*s)      arm 1: sin(pi*s)      arm 2: s

In the nonstationary variant the means rotate cyclically (arm 0 takes arm 1's
curve, and so on) after a fixed fraction of the horizon.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np

from .errors import DomainError, LogParseError, ShapeError


@dataclass(frozen=True)
class FullInfoRound:
    """One environment round with every arm's loss revealed (oracle use only)."""

    context: float
    losses: tuple[float, ...]


def stationary_means(s) -> np.ndarray:
    """Per-arm mean losses at contexts s; shape (..., 3)."""
    s = np.asarray(s, dtype=float)
    return np.stack(
        [0.5 + 0.5 * np.sin(2.0 * np.pi * s), np.sin(np.pi * s), s], axis=-1
    )


def rotated_means(s) -> np.ndarray:
    """Means after the cyclic shift: each arm inherits the next arm's curve."""
    return np.roll(stationary_means(s), -1, axis=-1)


class SinusoidalBernoulliEnv:
    """Three-arm Bernoulli environment with smooth context-dependent means."""

    num_arms = 3

    def __init__(self, horizon: int, switched: bool = False,
                 switch_fraction: float = 0.25):
        if horizon < 1:
            raise DomainError(f"horizon must be >= 1, got {horizon}")
        if not 0.0 <= switch_fraction <= 1.0:
            raise DomainError(
                f"switch_fraction must be in [0,1], got {switch_fraction}"
            )
        self.horizon = int(horizon)
        self.switched = bool(switched)
        self.switch_fraction = float(switch_fraction)
        self.switch_round = (
            int(math.floor(switch_fraction * horizon)) if switched else horizon
        )

    def mean_losses(self, s: float, t: int) -> np.ndarray:
        """Arm mean losses at context s during round t (0-based)."""
        if not 0 <= t < self.horizon:
            raise DomainError(f"round {t} outside 0..{self.horizon - 1}")
        if t >= self.switch_round:
            return rotated_means(s)
        return stationary_means(s)

    def step(self, t: int, rng) -> FullInfoRound:
        """Draw one round: context first, then the three loss coin flips."""
        s = rng.random()
        means = self.mean_losses(s, t)
        losses = (rng.random(self.num_arms) < means).astype(float)
        return FullInfoRound(s, tuple(losses))

    def generate(self, rng) -> tuple[np.ndarray, np.ndarray]:
        """Vectorized dataset: contexts (T,), loss matrix (T, 3).

        Stream layout is all contexts first, then the loss uniforms row-major;
        the whole dataset is a deterministic function of the generator state.
        """
        contexts = rng.random(self.horizon)
        means = stationary_means(contexts)
        if self.switch_round < self.horizon:
            means[self.switch_round:] = rotated_means(
                contexts[self.switch_round:]
            )
        losses = (rng.random((self.horizon, self.num_arms)) < means).astype(float)
        return contexts, losses


# -- logged interaction streams -------------------------------------------


@dataclass(frozen=True)
class LoggedRound:
    """One logged display: context, which arm was shown (0-based), outcome."""

    context: tuple[float, ...]
    displayed_arm: int
    clicked: bool


def make_logged_stream(env: SinusoidalBernoulliEnv, rng) -> list[LoggedRound]:
    """Uniform-logging synthetic stream from the sinusoidal model.

    The shown arm is uniform over the three arms; a click happens exactly when
    the arm's Bernoulli loss comes up 0.
    """
    contexts, losses = env.generate(rng)
    shown = rng.integers(0, env.num_arms, env.horizon)
    return [
        LoggedRound((float(contexts[t]),), int(shown[t]),
                    losses[t, shown[t]] == 0.0)
        for t in range(env.horizon)
    ]


def write_logged_csv(rounds, path) -> None:
    """Columns s_1..s_n, displayed_arm (1-based), clicked (0/1)."""
    if not rounds:
        raise ShapeError("no rounds to write")
    dims = len(rounds[0].context)
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow([f"s_{d + 1}" for d in range(dims)]
                        + ["displayed_arm", "clicked"])
        for r in rounds:
            if len(r.context) != dims:
                raise ShapeError("rounds have mixed context dimensions")
            writer.writerow([repr(c) for c in r.context]
                            + [r.displayed_arm + 1, int(r.clicked)])


def read_logged_csv(path) -> list[LoggedRound]:
    rounds = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[-2:] != ["displayed_arm", "clicked"]:
            raise LogParseError(
                "header must end with displayed_arm,clicked", line_number=1
            )
        dims = len(header) - 2
        if dims < 1 or header[:dims] != [f"s_{d + 1}" for d in range(dims)]:
            raise LogParseError(
                "context columns must be s_1..s_n", line_number=1
            )
        for lineno, row in enumerate(reader, start=2):
            if len(row) != dims + 2:
                raise LogParseError(
                    f"expected {dims + 2} fields, got {len(row)}", lineno
                )
            try:
                context = tuple(float(v) for v in row[:dims])
                arm = int(row[dims])
                clicked = int(row[dims + 1])
            except ValueError as exc:
                raise LogParseError(str(exc), lineno) from None
            if not all(0.0 <= c <= 1.0 for c in context):
                raise LogParseError(f"context {context} outside [0,1]", lineno)
            if arm < 1:
                raise LogParseError(f"displayed_arm must be >= 1, got {arm}", lineno)
            if clicked not in (0, 1):
                raise LogParseError(f"clicked must be 0 or 1, got {clicked}", lineno)
            rounds.append(LoggedRound(context, arm - 1, bool(clicked)))
    return rounds


# -- replay evaluation -----------------------------------------------------


@dataclass(frozen=True)
class ReplayResult:
    """Loss total and match count from replaying a logged stream."""

    total_loss: float
    matched: int

    @property
    def loss_rate(self) -> float:
        if self.matched == 0:
            raise DomainError("no rounds matched; loss rate undefined")
        return self.total_loss / self.matched

    @property
    def click_rate(self) -> float:
        return 1.0 - self.loss_rate


def replay_evaluate(algorithm, rounds, rng) -> ReplayResult:
    """Offline evaluation against a logged stream.

    Each round the algorithm proposes an arm. On a match with the logged
    display, the logged outcome (loss 1 unless clicked) feeds the algorithm and
    is scored; on a mismatch the round is discarded and leaves no trace in the
    algorithm's state.
    """
    total = 0.0
    matched = 0
    for r in rounds:
        context = r.context[0] if len(r.context) == 1 else r.context
        decision = algorithm.select(context, rng)
        if decision.arm == r.displayed_arm:
            loss = 0.0 if r.clicked else 1.0
            algorithm.update(decision, loss)
            total += loss
            matched += 1
    return ReplayResult(total, matched)
