"""Regret accounting, bound checks, and quantization-gap measurement."""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq

from .environments import stationary_means
from .errors import DomainError, ShapeError
from .grid import CellGrid


def best_mapping_loss(cells, loss_matrix, n_cells: int):
    """Hindsight-optimal cell-to-arm mapping and its total loss.

    cells: (T,) quantized contexts. loss_matrix: (T, M) full loss table.
    Per cell the arm minimizing the realized cumulative loss wins; ties go to
    the lowest arm index. Cells never visited default to arm 0 and add nothing.
    """
    cells = np.asarray(cells, dtype=np.int64)
    loss_matrix = np.asarray(loss_matrix, dtype=float)
    if cells.ndim != 1 or loss_matrix.ndim != 2 or len(cells) != len(loss_matrix):
        raise ShapeError(
            f"cells {cells.shape} and losses {loss_matrix.shape} do not align"
        )
    if len(cells) == 0:
        raise DomainError("empty history has no best mapping")
    if cells.min() < 0 or cells.max() >= n_cells:
        raise DomainError("cell index outside 0..n_cells-1")
    sums = np.zeros((n_cells, loss_matrix.shape[1]))
    np.add.at(sums, cells, loss_matrix)
    mapping = np.argmin(sums, axis=1)  # argmin takes the lowest index on ties
    total = float(sums[np.arange(n_cells), mapping].sum())
    return total, mapping


@dataclass(frozen=True)
class BoundCheck:
    """Outcome of comparing an empirical mean regret against a bound."""

    ok: bool
    bound: float
    empirical: float

    @property
    def margin(self) -> float:
        return self.bound - self.empirical


def flat_mixture_regret_bound(prior: float, eta: float, num_arms: int,
                       horizon: int) -> float:
    """Regret bound of a flat mixture against one expert: ln(1/prior)/eta
    plus num_arms*horizon*eta/2."""
    if not 0.0 < prior <= 1.0:
        raise DomainError(f"prior must be in (0,1], got {prior}")
    if eta <= 0.0:
        raise DomainError(f"eta must be positive, got {eta}")
    return math.log(1.0 / prior) / eta + num_arms * horizon * eta / 2.0


def structured_bound(psi: int, hs: int, a_r: int, num_arms: int, horizon: int,
                     eta: float) -> float:
    """Regret bound of the hierarchical learner against mappings reachable
    with a_r splittings."""
    if eta <= 0.0:
        raise DomainError(f"eta must be positive, got {eta}")
    log_term = math.log((hs + 1) * num_arms)
    return psi * (a_r + 1) * log_term / eta + num_arms * horizon * eta / 2.0


def optimized_structured_bound(psi: int, hs: int, a_r: int, num_arms: int,
                               horizon: int) -> float:
    """Closed-form regret value at the bound-optimizing learning rate:
    sqrt(0.5 * psi * M * T * (a_r + 1) * ln((hs + 1) M))."""
    log_term = math.log((hs + 1) * num_arms)
    return math.sqrt(0.5 * psi * num_arms * horizon * (a_r + 1) * log_term)


def check_structured_bound(empirical_mean_regret: float, psi: int, hs: int,
                           a_r: int, num_arms: int, horizon: int,
                           eta: float) -> BoundCheck:
    bound = structured_bound(psi, hs, a_r, num_arms, horizon, eta)
    return BoundCheck(empirical_mean_regret <= bound, bound,
                      float(empirical_mean_regret))


def optimal_policy_thresholds() -> tuple[float, float]:
    """Context thresholds where the pointwise best arm changes in the
    stationary sinusoidal model, recomputed numerically.

    Below the first threshold arm 2 (mean s) is best; between them arm 0
    (mean 0.5 + 0.5 sin 2 pi s); above the second, arm 1 (mean sin pi s).
    """

    def f_low(s):
        m = stationary_means(s)
        return float(m[..., 0] - m[..., 2])  # arm0 - arm2

    def f_high(s):
        m = stationary_means(s)
        return float(m[..., 0] - m[..., 1])  # arm0 - arm1

    low = brentq(f_low, 0.4, 0.6, xtol=1e-12)
    high = brentq(f_high, 0.85, 0.99, xtol=1e-12)
    return float(low), float(high)


def clairvoyant_loss_rate(mean_fn=stationary_means, n_points: int = 10**6) -> float:
    """Average pointwise-minimum loss over the context line (midpoint rule)."""
    s = (np.arange(n_points) + 0.5) / n_points
    return float(np.min(mean_fn(s), axis=-1).mean())


@dataclass(frozen=True)
class QuantizationGapReport:
    """Loss of the best cell-constant policy relative to the pointwise one."""

    n_cells: int
    measured_gap: float
    bound: float
    constant: float

    @property
    def ok(self) -> bool:
        return self.measured_gap <= self.bound


def quantization_gap(loss_fns, grid: CellGrid,
                     n_points: int = 10**6) -> QuantizationGapReport:
    """Gap between the best mapping on a grid and the pointwise optimum.

    loss_fns: one callable per arm mapping context arrays (n_points, dims) or
    (n_points,) for dims=1 to deterministic losses. The smoothness constant is
    the largest per-dimension slope observed on the evaluation mesh.
    """
    dims = grid.dims
    per_dim = max(2, int(round(n_points ** (1.0 / dims))))
    axes = [(np.arange(per_dim) + 0.5) / per_dim for _ in range(dims)]
    mesh = np.stack(
        [g.ravel() for g in np.meshgrid(*axes, indexing="ij")], axis=-1
    )
    pts = mesh[:, 0] if dims == 1 else mesh
    values = np.stack([np.asarray(fn(pts), dtype=float) for fn in loss_fns],
                      axis=-1)  # (P, M)
    if values.ndim != 2 or len(values) != len(mesh):
        raise ShapeError("loss functions must return one value per point")

    shape = (per_dim,) * dims
    cells = grid.cells_of(mesh)
    pointwise = values.min(axis=-1).mean()
    sums = np.zeros((grid.total_cells, values.shape[1]))
    np.add.at(sums, cells, values)
    best_arm = np.argmin(sums, axis=1)
    best_total = sums[np.arange(grid.total_cells), best_arm].sum()
    measured = float(best_total / len(mesh) - pointwise)

    # slope estimate: max finite difference along each axis of the mesh
    constant = 0.0
    grid_vals = values.reshape(shape + (values.shape[1],))
    for d in range(dims):
        diffs = np.abs(np.diff(grid_vals, axis=d)) * per_dim
        if diffs.size:
            constant = max(constant, float(diffs.max()))
    bound = 2.0 * constant * math.sqrt(dims) / grid.total_cells ** (1.0 / dims)
    return QuantizationGapReport(grid.total_cells, measured, bound, constant)


def aggregate_runs(loss_sequences) -> np.ndarray:
    """Average accumulated loss curve over runs: mean of cumsum(l)/t.

    All sequences must share one length; the result has that length.
    """
    arrays = [np.asarray(seq, dtype=float) for seq in loss_sequences]
    if not arrays:
        raise ShapeError("no runs to aggregate")
    length = len(arrays[0])
    if any(a.ndim != 1 or len(a) != length for a in arrays):
        raise ShapeError("runs have mismatched lengths")
    t = np.arange(1, length + 1)
    stacked = np.stack([np.cumsum(a) / t for a in arrays])
    return stacked.mean(axis=0)


@dataclass
class RegretReport:
    """Ensemble summary of algorithm loss against the hindsight mapping."""

    algorithm: str
    horizon: int
    runs: int
    mean_algorithm_loss: float
    mean_best_mapping_loss: float
    mean_regret: float
    eta: float | None = None
    bound: float | None = None
    bound_ok: bool | None = None
    final_average_loss: float = 0.0
    extras: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "algorithm": self.algorithm,
            "horizon": self.horizon,
            "runs": self.runs,
            "mean_algorithm_loss": self.mean_algorithm_loss,
            "mean_best_mapping_loss": self.mean_best_mapping_loss,
            "mean_regret": self.mean_regret,
            "eta": self.eta,
            "bound": self.bound,
            "bound_ok": self.bound_ok,
            "final_average_loss": self.final_average_loss,
            "extras": self.extras,
        }
