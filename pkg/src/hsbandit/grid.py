"""Uniform quantization of the context cube [0,1]^n into rectangular cells.

Cells are indexed 0..N-1 in row-major order over the dimensions in declaration
order. A coordinate of exactly 1.0 falls into the last cell along its dimension.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, DomainError, ShapeError


def _is_power_of_two(k: int) -> bool:
    return k >= 1 and (k & (k - 1)) == 0


@dataclass(frozen=True)
class CellGrid:
    """A per-dimension split count table for the unit cube.

    splits_per_dim[d] is the number of equal slices along dimension d; the total
    cell count is the product. Row-major cell order: the last dimension varies
    fastest.
    """

    splits_per_dim: tuple[int, ...]
    dims: int = field(init=False)
    total_cells: int = field(init=False)

    def __post_init__(self):
        splits = tuple(int(s) for s in self.splits_per_dim)
        if not splits:
            raise ConfigError("grid needs at least one dimension")
        if any(s < 1 for s in splits):
            raise ConfigError(f"split counts must be positive, got {splits}")
        object.__setattr__(self, "splits_per_dim", splits)
        object.__setattr__(self, "dims", len(splits))
        n = 1
        for s in splits:
            n *= s
        object.__setattr__(self, "total_cells", n)

    @classmethod
    def uniform(cls, dims: int, total_cells: int) -> "CellGrid":
        """Allocate log2(total_cells) binary splits as evenly as possible.

        The first (log2 N mod n) dimensions get one extra halving, so the
        per-dim split counts are 2^(floor(log2 N / n)+1) and 2^(floor(log2 N / n)).
        """
        if dims < 1:
            raise ConfigError(f"dims must be >= 1, got {dims}")
        if not _is_power_of_two(total_cells):
            raise ConfigError(
                f"total_cells must be a power of 2 for the uniform scheme, got {total_cells}"
            )
        q = total_cells.bit_length() - 1  # log2 N
        base, extra = divmod(q, dims)
        splits = tuple(2 ** (base + 1) if d < extra else 2**base for d in range(dims))
        return cls(splits)

    def cell_of(self, context) -> int:
        """Map a context point to its row-major cell index (0-based)."""
        if isinstance(context, float) and self.dims == 1:
            coords = (context,)
        else:
            x = np.atleast_1d(np.asarray(context, dtype=float))
            if x.shape != (self.dims,):
                raise ShapeError(
                    f"context has shape {x.shape}, grid expects ({self.dims},)"
                )
            coords = x.tolist()
        idx = 0
        for d, s in enumerate(self.splits_per_dim):
            xd = coords[d]
            if not 0.0 <= xd <= 1.0:
                raise DomainError(
                    f"context {coords} outside [0,1]^{self.dims}"
                )
            k = int(xd * s)
            if k == s:  # coordinate exactly 1.0 clamps into the top slice
                k = s - 1
            idx = idx * s + k
        return idx

    def cells_of(self, contexts) -> np.ndarray:
        """Vectorized cell_of over an array of shape (T, dims) or (T,) when dims=1."""
        x = np.asarray(contexts, dtype=float)
        if x.ndim == 1 and self.dims == 1:
            x = x[:, None]
        if x.ndim != 2 or x.shape[1] != self.dims:
            raise ShapeError(
                f"contexts have shape {x.shape}, grid expects (T, {self.dims})"
            )
        if np.any(x < 0.0) or np.any(x > 1.0):
            raise DomainError("contexts outside the unit cube")
        splits = np.asarray(self.splits_per_dim)
        ks = np.minimum((x * splits).astype(np.int64), splits - 1)
        idx = np.zeros(len(x), dtype=np.int64)
        for d, s in enumerate(self.splits_per_dim):
            idx = idx * s + ks[:, d]
        return idx

    def cell_center(self, cell: int) -> tuple[float, ...]:
        """Center point of a cell, useful for surjectivity checks."""
        if not 0 <= cell < self.total_cells:
            raise DomainError(f"cell {cell} outside 0..{self.total_cells - 1}")
        coords = []
        rem = cell
        for s in reversed(self.splits_per_dim):
            rem, k = divmod(rem, s)
            coords.append((k + 0.5) / s)
        return tuple(reversed(coords))


def quantize(context, grid: CellGrid) -> int:
    """Functional alias for CellGrid.cell_of."""
    return grid.cell_of(context)
