"""EXP3 and per-cell EXP3 baselines.

Tuning follows the classic horizon-known recipe: exploration mass
gamma = min(1, sqrt(M ln M / ((e-1) T))) mixed uniformly into the exponential
weights, with learning rate eta = gamma / M on importance-weighted losses. The
per-cell variant quantizes the context and runs one independent weight vector
per cell, all sharing the caller's RNG stream in visit order; its default
(gamma, eta) pair is tuned for the expected local horizon T/N of each cell,
which is how the per-cell regret guarantee is derived for uniform contexts.
"""

from __future__ import annotations

import math

import numpy as np

from .decision import AlternationGuard, ArmDecision, check_loss, sample_arm
from .errors import ConfigError, DomainError
from .grid import CellGrid
from .hsb import sample_arm_with


def exp3_tuning(num_arms: int, horizon: float) -> tuple[float, float]:
    """(exploration gamma, learning rate eta) for a known horizon.

    horizon may be fractional: the per-cell variant tunes each cell for its
    expected share T/N of the rounds.
    """
    if num_arms < 2:
        raise ConfigError(f"need at least 2 arms, got {num_arms}")
    if horizon < 1:
        raise ConfigError(f"horizon must be >= 1, got {horizon}")
    gamma = min(
        1.0, math.sqrt(num_arms * math.log(num_arms) / ((math.e - 1) * horizon))
    )
    return gamma, gamma / num_arms


def _mixed_simplex(logw, gamma) -> np.ndarray:
    w = np.exp(logw - np.max(logw))
    return (1.0 - gamma) * (w / w.sum()) + gamma / len(logw)


class Exp3(AlternationGuard):
    """Context-free adversarial bandit over M arms."""

    def __init__(self, num_arms: int, horizon: int,
                 exploration: float | None = None, eta: float | None = None):
        super().__init__()
        auto_gamma, auto_eta = exp3_tuning(num_arms, horizon)
        self.num_arms = int(num_arms)
        self.horizon = int(horizon)
        self.exploration = auto_gamma if exploration is None else float(exploration)
        self.eta = auto_eta if eta is None else float(eta)
        if not 0.0 <= self.exploration <= 1.0:
            raise ConfigError(f"exploration must be in [0,1], got {self.exploration}")
        self.log_weights = np.zeros(self.num_arms)
        self.t = 1

    def simplex(self) -> np.ndarray:
        return _mixed_simplex(self.log_weights, self.exploration)

    def select(self, context, rng) -> ArmDecision:
        """Ignores the context; present for harness uniformity."""
        p = self.simplex()
        return self._issue(ArmDecision(sample_arm(p, rng), 0, p))

    def update(self, decision: ArmDecision, loss) -> None:
        self._consume(decision)
        loss = check_loss(loss)
        self.log_weights[decision.arm] -= self.eta * (
            loss / decision.chosen_probability
        )
        self.log_weights -= self.log_weights.max()
        self.t += 1

    def run_bandit_rounds(self, cells, loss_matrix, rng, record_probs=False):
        """Batch driver matching HsbLearner.run_bandit_rounds (cells ignored)."""
        self._pending = None
        out = _run_cellwise(
            np.zeros(len(cells), dtype=np.int64),
            np.ascontiguousarray(loss_matrix, dtype=np.float64),
            self.log_weights[None, :],
            self.exploration, self.eta, rng, record_probs,
        )
        self.t += len(cells)
        return out


class SExp3(AlternationGuard):
    """Independent EXP3 per grid cell, each tuned for its local horizon T/N."""

    def __init__(self, grid: CellGrid, num_arms: int, horizon: int,
                 exploration: float | None = None, eta: float | None = None):
        super().__init__()
        local_horizon = max(1.0, horizon / grid.total_cells)
        auto_gamma, auto_eta = exp3_tuning(num_arms, local_horizon)
        self.grid = grid
        self.num_arms = int(num_arms)
        self.horizon = int(horizon)
        self.exploration = auto_gamma if exploration is None else float(exploration)
        self.eta = auto_eta if eta is None else float(eta)
        self.log_weights = np.zeros((grid.total_cells, num_arms))
        self.t = 1

    def simplex_at(self, cell: int) -> np.ndarray:
        if not 0 <= cell < self.grid.total_cells:
            raise DomainError(f"cell {cell} outside 0..{self.grid.total_cells - 1}")
        return _mixed_simplex(self.log_weights[cell], self.exploration)

    def select(self, context, rng) -> ArmDecision:
        cell = self.grid.cell_of(context)
        p = self.simplex_at(cell)
        return self._issue(ArmDecision(sample_arm(p, rng), cell, p))

    def update(self, decision: ArmDecision, loss) -> None:
        self._consume(decision)
        loss = check_loss(loss)
        row = self.log_weights[decision.cell]
        row[decision.arm] -= self.eta * (loss / decision.chosen_probability)
        row -= row.max()
        self.t += 1

    def run_bandit_rounds(self, cells, loss_matrix, rng, record_probs=False):
        self._pending = None
        out = _run_cellwise(
            np.ascontiguousarray(cells, dtype=np.int64),
            np.ascontiguousarray(loss_matrix, dtype=np.float64),
            self.log_weights,
            self.exploration, self.eta, rng, record_probs,
        )
        self.t += len(cells)
        return out


def _run_cellwise(cells, loss_matrix, logw, gamma, eta, rng, record_probs):
    """Shared whole-run loop; mutates logw rows in place."""
    horizon = len(cells)
    num_arms = logw.shape[1]
    us = rng.random(horizon)
    arms = np.zeros(horizon, dtype=np.int64)
    incurred = np.zeros(horizon)
    probs = np.zeros((horizon if record_probs else 0, num_arms))
    if _kern is not None:
        _kern(cells, loss_matrix, logw, gamma, eta, us, arms, incurred, probs,
              record_probs)
        return arms, incurred, (probs if record_probs else None)
    uniform = gamma / num_arms
    scale = 1.0 - gamma
    for t in range(horizon):
        row = logw[cells[t]]
        w = np.exp(row - row.max())
        p = scale * (w / w.sum()) + uniform
        arm = sample_arm_with(p, us[t])
        if record_probs:
            probs[t] = p
        loss = loss_matrix[t, arm]
        arms[t] = arm
        incurred[t] = loss
        if loss != 0.0:
            row[arm] -= eta * (loss / p[arm])
            row -= row.max()
    return arms, incurred, (probs if record_probs else None)


def _build_kernel():
    try:
        from numba import njit
    except ImportError:  # pragma: no cover
        return None

    @njit(cache=True)
    def kern(cells, loss_matrix, logw, gamma, eta, us, arms, incurred, probs,
             record_probs):
        horizon = cells.shape[0]
        num_arms = logw.shape[1]
        uniform = gamma / num_arms
        scale = 1.0 - gamma
        p = np.empty(num_arms)
        for t in range(horizon):
            c = cells[t]
            mx = logw[c, 0]
            for m in range(1, num_arms):
                if logw[c, m] > mx:
                    mx = logw[c, m]
            tot = 0.0
            for m in range(num_arms):
                p[m] = math.exp(logw[c, m] - mx)
                tot += p[m]
            for m in range(num_arms):
                p[m] = scale * p[m] / tot + uniform
            acc = 0.0
            arm = num_arms - 1
            for m in range(num_arms):
                acc += p[m]
                if us[t] < acc:
                    arm = m
                    break
            if record_probs:
                for m in range(num_arms):
                    probs[t, m] = p[m]
            loss = loss_matrix[t, arm]
            arms[t] = arm
            incurred[t] = loss
            if loss != 0.0:
                logw[c, arm] -= eta * (loss / p[arm])
                mx = logw[c, 0]
                for m in range(1, num_arms):
                    if logw[c, m] > mx:
                        mx = logw[c, m]
                for m in range(num_arms):
                    logw[c, m] -= mx
    return kern


_kern = _build_kernel()
