"""Per-round result records and their CSV form.

Columns: t (1-based round), cell (0-based), arm (1-based in the file),
loss, then the full sampling simplex p_1..p_M. Floats are written with repr,
which round-trips exactly and keeps identical runs byte-identical.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np

from .errors import LogParseError, ShapeError


@dataclass(frozen=True)
class RoundRecord:
    t: int
    cell: int
    arm: int  # 0-based in memory
    loss: float
    simplex: tuple[float, ...]


def write_round_records(path, cells, arms, losses, probs) -> None:
    cells = np.asarray(cells)
    arms = np.asarray(arms)
    losses = np.asarray(losses)
    probs = np.asarray(probs)
    if not (len(cells) == len(arms) == len(losses) == len(probs)):
        raise ShapeError("record arrays have mismatched lengths")
    n_arms = probs.shape[1]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["t", "cell", "arm", "loss"]
                        + [f"p_{m + 1}" for m in range(n_arms)])
        for t in range(len(cells)):
            writer.writerow(
                [t + 1, int(cells[t]), int(arms[t]) + 1, repr(float(losses[t]))]
                + [repr(float(p)) for p in probs[t]]
            )


def read_round_records(path) -> list[RoundRecord]:
    out = []
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        header = next(reader, None)
        if not header or header[:4] != ["t", "cell", "arm", "loss"]:
            raise LogParseError("header must start with t,cell,arm,loss", 1)
        n_arms = len(header) - 4
        if n_arms < 1 or header[4:] != [f"p_{m + 1}" for m in range(n_arms)]:
            raise LogParseError("simplex columns must be p_1..p_M", 1)
        for lineno, row in enumerate(reader, start=2):
            if len(row) != 4 + n_arms:
                raise LogParseError(
                    f"expected {4 + n_arms} fields, got {len(row)}", lineno
                )
            try:
                out.append(RoundRecord(
                    int(row[0]), int(row[1]), int(row[2]) - 1, float(row[3]),
                    tuple(float(v) for v in row[4:]),
                ))
            except ValueError as exc:
                raise LogParseError(str(exc), lineno) from None
    return out
