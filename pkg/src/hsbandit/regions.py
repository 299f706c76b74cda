"""Compact cell-index sets: sorted tuples of half-open (start, stop) runs.

Contiguous cell ranges compress to a single run, so tree-style regions stay O(1)
regardless of how many cells they cover.
"""

from __future__ import annotations

from bisect import bisect_right

Region = tuple[tuple[int, int], ...]


def region_from_cells(cells) -> Region:
    """Build a canonical run list from an iterable of cell indices."""
    sorted_cells = sorted(set(cells))
    runs = []
    for c in sorted_cells:
        if runs and c == runs[-1][1]:
            runs[-1][1] = c + 1
        else:
            runs.append([c, c + 1])
    return tuple((a, b) for a, b in runs)


def region_from_range(start: int, stop: int) -> Region:
    if stop <= start:
        return ()
    return ((start, stop),)


def region_size(region: Region) -> int:
    return sum(b - a for a, b in region)


def region_cells(region: Region):
    for a, b in region:
        yield from range(a, b)


def region_contains(region: Region, cell: int) -> bool:
    starts = [a for a, _ in region]
    i = bisect_right(starts, cell) - 1
    return i >= 0 and cell < region[i][1]


def region_union(regions) -> Region:
    """Union of several regions, re-canonicalized."""
    runs = sorted(r for region in regions for r in region)
    merged = []
    for a, b in runs:
        if merged and a <= merged[-1][1]:
            merged[-1][1] = max(merged[-1][1], b)
        else:
            merged.append([a, b])
    return tuple((a, b) for a, b in merged)


def regions_disjoint_union(parts, whole: Region) -> bool:
    """True when the parts are pairwise disjoint and tile the whole exactly."""
    total = sum(region_size(p) for p in parts)
    return total == region_size(whole) and region_union(parts) == whole
