"""Hierarchical splitting structures over a cell grid.

A structure is a rooted DAG of nodes. Each node covers a region (a set of
cells); an internal node carries one or more child groups, and every group
partitions the node's region exactly. The competition class induced by a
structure is the set of region-to-arm mappings reachable by recursively picking
"stay constant" or one child group at each node.

Six builders are provided:
  binary tree, K-ary tree, lexicographic interval graph, K-group lexicographic
  interval graph, arbitrary cell-subset splitting, arbitrary position splitting
  of axis-aligned boxes.
"""

from __future__ import annotations

import collections
import itertools
import json
import math
from dataclasses import dataclass, field
from typing import Callable, Iterator

from .errors import CapacityError, ConfigError, DomainError
from .grid import CellGrid
from .regions import (
    Region,
    region_contains,
    region_from_cells,
    region_from_range,
    region_size,
)

ARBITRARY_SPLIT_CELL_CAP = 16
DUMP_NODE_CAP = 100_000

# A routing step is (node_id, groups) where each group is
# (child_containing_cell, tuple_of_sibling_ids). Steps are ordered bottom-up:
# every node appears after all children of its groups that contain the cell.
RouteStep = tuple[int, tuple[tuple[int, tuple[int, ...]], ...]]


@dataclass(frozen=True)
class Node:
    """Materialized view of one structure node."""

    id: int
    region: Region
    child_groups: tuple[tuple[int, ...], ...]

    @property
    def is_leaf(self) -> bool:
        return not self.child_groups


@dataclass(frozen=True)
class StructureParams:
    """Constants of a structure family used by the learning-rate formula.

    a_r maps a region count R to the splitting-cost term A_R of the family.
    """

    kind: str
    psi: int
    hs: int
    a_r: Callable[[int], int]
    detail: dict = field(default_factory=dict)


def _check_r(r: int) -> int:
    r = int(r)
    if r < 1:
        raise DomainError(f"region count must be >= 1, got {r}")
    return r


class Structure:
    """Base interface shared by explicit and lazily-computed structures."""

    grid: CellGrid
    params: StructureParams

    @property
    def psi(self) -> int:
        return self.params.psi

    @property
    def hs(self) -> int:
        return self.params.hs

    @property
    def node_count(self) -> int:
        raise NotImplementedError

    @property
    def root_id(self) -> int:
        raise NotImplementedError

    def node_ids(self) -> Iterator[int]:
        raise NotImplementedError

    def region_of(self, node_id: int) -> Region:
        raise NotImplementedError

    def child_groups_of(self, node_id: int) -> tuple[tuple[int, ...], ...]:
        raise NotImplementedError

    def routing(self, cell: int) -> list[RouteStep]:
        raise NotImplementedError

    def node(self, node_id: int) -> Node:
        return Node(node_id, self.region_of(node_id), self.child_groups_of(node_id))

    def nodes(self) -> Iterator[Node]:
        for nid in self.node_ids():
            yield self.node(nid)

    def _check_cell(self, cell: int) -> int:
        cell = int(cell)
        if not 0 <= cell < self.grid.total_cells:
            raise DomainError(
                f"cell {cell} outside 0..{self.grid.total_cells - 1}"
            )
        return cell

    def nodes_containing(self, cell: int) -> list[int]:
        """Ids of all nodes whose region contains the cell, bottom-up."""
        return [nid for nid, _ in self.routing(cell)]

    def to_json_dict(self, max_nodes: int = DUMP_NODE_CAP) -> dict:
        if self.node_count > max_nodes:
            raise CapacityError(
                f"structure has {self.node_count} nodes, dump cap is {max_nodes}"
            )
        return {
            "kind": self.params.kind,
            "psi": self.psi,
            "hs": self.hs,
            "root_id": self.root_id,
            "node_count": self.node_count,
            "grid": {"splits_per_dim": list(self.grid.splits_per_dim)},
            "detail": dict(self.params.detail),
            "nodes": [
                {
                    "id": nd.id,
                    "region": [list(run) for run in nd.region],
                    "groups": [list(g) for g in nd.child_groups],
                }
                for nd in self.nodes()
            ],
        }

    def to_json(self, max_nodes: int = DUMP_NODE_CAP) -> str:
        return json.dumps(self.to_json_dict(max_nodes=max_nodes), indent=2)

    def validate(self) -> None:
        """Exhaustively check the partition/acyclicity invariants (test aid)."""
        for nd in self.nodes():
            size = region_size(nd.region)
            if size < 1:
                raise AssertionError(f"node {nd.id} has an empty region")
            for group in nd.child_groups:
                if len(group) < 2:
                    raise AssertionError(f"node {nd.id} group {group} too small")
                covered = 0
                for child in group:
                    child_region = self.region_of(child)
                    child_size = region_size(child_region)
                    if child_size >= size:
                        raise AssertionError(
                            f"child {child} of node {nd.id} does not shrink"
                        )
                    covered += child_size
                if covered != size:
                    raise AssertionError(
                        f"node {nd.id} group {group} does not tile the region"
                    )
                for cell_run in nd.region:
                    for cell in range(*cell_run):
                        hits = sum(
                            1
                            for child in group
                            if region_contains(self.region_of(child), cell)
                        )
                        if hits != 1:
                            raise AssertionError(
                                f"cell {cell} covered {hits} times in group "
                                f"{group} of node {nd.id}"
                            )


class ExplicitStructure(Structure):
    """Structure backed by a materialized node table."""

    def __init__(self, grid, nodes, root_id, params):
        self.grid = grid
        self.params = params
        self._nodes = {nd.id: nd for nd in nodes}
        if len(self._nodes) != len(nodes):
            raise ConfigError("duplicate node ids")
        self._root_id = root_id
        self._routing_cache: dict[int, list[RouteStep]] = {}

    @property
    def node_count(self) -> int:
        return len(self._nodes)

    @property
    def root_id(self) -> int:
        return self._root_id

    def node_ids(self):
        return iter(sorted(self._nodes))

    def node(self, node_id: int) -> Node:
        try:
            return self._nodes[node_id]
        except KeyError:
            raise DomainError(f"unknown node id {node_id}") from None

    def region_of(self, node_id: int) -> Region:
        return self.node(node_id).region

    def child_groups_of(self, node_id: int):
        return self.node(node_id).child_groups

    def routing(self, cell: int) -> list[RouteStep]:
        cell = self._check_cell(cell)
        cached = self._routing_cache.get(cell)
        if cached is not None:
            return cached
        chain = sorted(
            (nd for nd in self._nodes.values() if region_contains(nd.region, cell)),
            key=lambda nd: (region_size(nd.region), nd.id),
        )
        steps: list[RouteStep] = []
        for nd in chain:
            groups = []
            for group in nd.child_groups:
                inside = [
                    c for c in group if region_contains(self._nodes[c].region, cell)
                ]
                if len(inside) != 1:
                    raise AssertionError(
                        f"group {group} of node {nd.id} covers cell {cell} "
                        f"{len(inside)} times"
                    )
                child = inside[0]
                siblings = tuple(c for c in group if c != child)
                groups.append((child, siblings))
            steps.append((nd.id, tuple(groups)))
        if self.grid.total_cells <= 65536:
            self._routing_cache[cell] = steps
        return steps


class UniformTreeStructure(Structure):
    """Complete K-ary tree over N = K^depth cells, computed lazily.

    Heap numbering: root is node 0; the children of node v are
    K*v + 1 .. K*v + K; the leaf over cell c has id level_start(depth) + c.
    """

    def __init__(self, grid: CellGrid, arity: int, depth: int):
        if arity < 2:
            raise ConfigError(f"tree arity must be >= 2, got {arity}")
        if depth < 1:
            raise ConfigError(f"tree depth must be >= 1, got {depth}")
        if grid.total_cells != arity**depth:
            raise ConfigError(
                f"grid has {grid.total_cells} cells, expected {arity}**{depth}"
            )
        self.grid = grid
        self.arity = arity
        self.depth = depth
        n = grid.total_cells
        self._level_start = [0]
        for level in range(1, depth + 1):
            self._level_start.append(self._level_start[-1] + arity ** (level - 1))
        self._node_count = (arity ** (depth + 1) - 1) // (arity - 1)
        self.params = StructureParams(
            kind="binary-tree" if arity == 2 else "kary-tree",
            psi=arity,
            hs=1,
            a_r=lambda r: (_check_r(r) - 1) * depth,
            detail={"arity": arity, "depth": depth, "cells": n},
        )

    @property
    def node_count(self) -> int:
        return self._node_count

    @property
    def root_id(self) -> int:
        return 0

    def node_ids(self):
        return iter(range(self._node_count))

    def _level_of(self, node_id: int) -> int:
        if not 0 <= node_id < self._node_count:
            raise DomainError(f"unknown node id {node_id}")
        level = 0
        while level + 1 <= self.depth and self._level_start[level + 1] <= node_id:
            level += 1
        return level

    def region_of(self, node_id: int) -> Region:
        level = self._level_of(node_id)
        pos = node_id - self._level_start[level]
        width = self.arity ** (self.depth - level)
        return region_from_range(pos * width, (pos + 1) * width)

    def child_groups_of(self, node_id: int):
        level = self._level_of(node_id)
        if level == self.depth:
            return ()
        k = self.arity
        first = k * node_id + 1
        return (tuple(range(first, first + k)),)

    def routing(self, cell: int) -> list[RouteStep]:
        cell = self._check_cell(cell)
        k = self.arity
        node = self._level_start[self.depth] + cell
        steps: list[RouteStep] = [(node, ())]
        while node > 0:
            parent = (node - 1) // k
            first = k * parent + 1
            siblings = tuple(c for c in range(first, first + k) if c != node)
            steps.append((parent, (((node, siblings),))))
            node = parent
        return steps


class ArbitrarySplittingStructure(Structure):
    """One node per nonempty cell subset; groups are unordered bipartitions.

    Node id for a subset with bitmask b is b - 1, so the root (full set) has id
    2^N - 2. Everything is computed from bit arithmetic on demand because the
    group count grows like 3^N.
    """

    def __init__(self, grid: CellGrid, arm_count: int | None = None,
                 cell_cap: int = ARBITRARY_SPLIT_CELL_CAP):
        n = grid.total_cells
        if n < 2:
            raise ConfigError("arbitrary splitting needs at least 2 cells")
        if n > cell_cap:
            raise CapacityError(
                f"arbitrary splitting over {n} cells exceeds the cap of {cell_cap} "
                f"(node count would be 2^{n} - 1)"
            )
        if arm_count is not None and arm_count < 1:
            raise ConfigError(f"arm_count must be >= 1, got {arm_count}")
        self.grid = grid
        self.arm_count = arm_count
        self._n = n
        self._full = (1 << n) - 1

        def a_r(r):
            _check_r(r)
            if arm_count is None:
                raise ConfigError(
                    "the splitting-cost term of the arbitrary-splitting family "
                    "depends on the arm count; rebuild with arm_count set"
                )
            return arm_count - 1

        self.params = StructureParams(
            kind="arbitrary-splitting",
            psi=2,
            hs=2 ** (n - 1) - 1,
            a_r=a_r,
            detail={"cells": n, "arm_count": arm_count},
        )

    @property
    def node_count(self) -> int:
        return self._full

    @property
    def root_id(self) -> int:
        return self._full - 1

    def node_ids(self):
        return iter(range(self._full))

    def _mask_of(self, node_id: int) -> int:
        if not 0 <= node_id < self._full:
            raise DomainError(f"unknown node id {node_id}")
        return node_id + 1

    def region_of(self, node_id: int) -> Region:
        mask = self._mask_of(node_id)
        return region_from_cells(c for c in range(self._n) if mask >> c & 1)

    def child_groups_of(self, node_id: int):
        mask = self._mask_of(node_id)
        if mask & (mask - 1) == 0:  # singleton
            return ()
        low = mask & -mask
        groups = []
        # Enumerate submasks that contain the lowest cell; the complement forms
        # the other side, so each unordered bipartition appears exactly once.
        sub = (mask - 1) & mask
        sides = []
        while sub:
            if sub & low and sub != mask:
                sides.append(sub)
            sub = (sub - 1) & mask
        for a in sorted(sides):
            groups.append((a - 1, (mask ^ a) - 1))
        return tuple(groups)

    def routing(self, cell: int) -> list[RouteStep]:
        cell = self._check_cell(cell)
        bit = 1 << cell
        rest = self._full ^ bit
        masks = []
        sub = rest
        while True:
            masks.append(sub | bit)
            if sub == 0:
                break
            sub = (sub - 1) & rest
        masks.sort(key=lambda m: (bin(m).count("1"), m))
        steps: list[RouteStep] = []
        for mask in masks:
            groups = []
            for a, b in self.child_groups_of(mask - 1):
                if (a + 1) & bit:
                    groups.append((a, (b,)))
                else:
                    groups.append((b, (a,)))
            steps.append((mask - 1, tuple(groups)))
        return steps


def build_binary_tree(grid: CellGrid) -> UniformTreeStructure:
    """Complete binary tree; depth = log2(total cells)."""
    n = grid.total_cells
    depth = n.bit_length() - 1
    if n < 2 or 2**depth != n:
        raise ConfigError(f"binary tree needs a power-of-2 cell count, got {n}")
    return UniformTreeStructure(grid, 2, depth)


def build_kary_tree(grid: CellGrid, arity: int) -> UniformTreeStructure:
    """Complete K-ary tree; total cells must equal arity**depth."""
    if arity < 2:
        raise ConfigError(f"arity must be >= 2, got {arity}")
    n = grid.total_cells
    depth = round(math.log(n, arity))
    for cand in (depth - 1, depth, depth + 1):
        if cand >= 1 and arity**cand == n:
            return UniformTreeStructure(grid, arity, cand)
    raise ConfigError(f"{n} cells is not a power of arity {arity}")


def _interval_nodes(intervals, groups_fn, grid, params_fn):
    """Shared assembly for the interval-graph builders.

    intervals: iterable of (start, stop) half-open cell intervals including the
    root (0, N). Ids are assigned by (length, start) so shorter intervals, which
    can only ever sit below longer ones, get smaller ids.
    """
    ordered = sorted(set(intervals), key=lambda iv: (iv[1] - iv[0], iv[0]))
    ids = {iv: i for i, iv in enumerate(ordered)}
    nodes = []
    for iv, nid in ids.items():
        groups = tuple(
            tuple(ids[piece] for piece in group) for group in groups_fn(iv)
        )
        nodes.append(Node(nid, region_from_range(*iv), groups))
    root = ids[(0, grid.total_cells)]
    return ExplicitStructure(grid, nodes, root, params_fn(ids))


def build_lexicographic_graph(grid: CellGrid) -> ExplicitStructure:
    """All N(N+1)/2 contiguous intervals; one group per binary cut position."""
    n = grid.total_cells
    if n < 2:
        raise ConfigError("lexicographic graph needs at least 2 cells")
    intervals = [(a, b) for a in range(n) for b in range(a + 1, n + 1)]

    def groups_fn(iv):
        a, b = iv
        return [((a, cut), (cut, b)) for cut in range(a + 1, b)]

    def params_fn(_ids):
        return StructureParams(
            kind="lexicographic",
            psi=2,
            hs=n - 1,
            a_r=lambda r: _check_r(r) - 1,
            detail={"cells": n},
        )

    return _interval_nodes(intervals, groups_fn, grid, params_fn)


def _compositions(start, stop, pieces):
    """All ways to cut [start, stop) into `pieces` nonempty contiguous runs."""
    interior = range(start + 1, stop)
    for cuts in itertools.combinations(interior, pieces - 1):
        bounds = (start,) + cuts + (stop,)
        yield tuple((bounds[i], bounds[i + 1]) for i in range(pieces))


def build_kgroup_lexicographic(
    grid: CellGrid, group_size: int, max_total_groups: int = 2_000_000
) -> ExplicitStructure:
    """Interval graph whose groups cut an interval into `group_size` pieces.

    An interval of length L >= group_size gets one group per composition into
    exactly group_size pieces; shorter intervals (length 2..group_size-1) expose
    compositions into every piece count from 2 up to their length, so no
    interval longer than one cell is a dead end. Only intervals reachable from
    the root are materialized. group_size=2 reproduces the lexicographic graph.
    """
    n = grid.total_cells
    k = int(group_size)
    if n < 2:
        raise ConfigError("interval graph needs at least 2 cells")
    if not 2 <= k <= n:
        raise ConfigError(f"group size must be in 2..{n}, got {k}")

    def interval_groups(iv):
        a, b = iv
        length = b - a
        if length < 2:
            return []
        if length >= k:
            return list(_compositions(a, b, k))
        return [
            comp
            for pieces in range(2, length + 1)
            for comp in _compositions(a, b, pieces)
        ]

    # Reachability sweep from the root, with a guard on total group count.
    root = (0, n)
    seen = {root}
    frontier = [root]
    group_budget = max_total_groups
    while frontier:
        iv = frontier.pop()
        groups = interval_groups(iv)
        group_budget -= len(groups)
        if group_budget < 0:
            raise CapacityError(
                f"interval graph with N={n}, group size {k} exceeds "
                f"{max_total_groups} total groups"
            )
        for comp in groups:
            for piece in comp:
                if piece not in seen:
                    seen.add(piece)
                    frontier.append(piece)

    hs = max((len(interval_groups(iv)) for iv in seen), default=0)

    def params_fn(_ids):
        return StructureParams(
            kind="kgroup-lexicographic",
            psi=k,
            hs=hs,
            a_r=lambda r: math.ceil((_check_r(r) - 1) / (k - 1)),
            detail={"cells": n, "group_size": k},
        )

    return _interval_nodes(seen, interval_groups, grid, params_fn)


def build_arbitrary_splitting(
    grid: CellGrid, arm_count: int | None = None,
    cell_cap: int = ARBITRARY_SPLIT_CELL_CAP,
) -> ArbitrarySplittingStructure:
    """One node per nonempty cell subset, split by unordered bipartitions."""
    return ArbitrarySplittingStructure(grid, arm_count=arm_count, cell_cap=cell_cap)


def _box_region(grid: CellGrid, lo, hi) -> Region:
    """Row-major cell region of the box with per-dim cell ranges [lo, hi)."""
    splits = grid.splits_per_dim
    if len(splits) == 1:
        return region_from_range(lo[0], hi[0])
    return region_from_cells(
        c
        for prefix in itertools.product(
            *(range(lo[d], hi[d]) for d in range(len(splits) - 1))
        )
        for base in (_flatten_prefix(prefix, splits),)
        for c in range(base * splits[-1] + lo[-1], base * splits[-1] + hi[-1])
    )


def _flatten_prefix(prefix, splits) -> int:
    base = 0
    for d, kd in enumerate(prefix):
        base = base * splits[d] + kd
    return base


def build_arbitrary_position_splitting(
    grid: CellGrid, depth: int
) -> ExplicitStructure:
    """Axis-aligned boxes split by halving one dimension per step.

    Nodes are deduplicated (halving x then y meets halving y then x), so the
    result is a DAG. A node at total split count `depth` is a leaf; each finest
    partition has 2**depth boxes.
    """
    splits = grid.splits_per_dim
    ndim = grid.dims
    exps = []
    for s in splits:
        e = s.bit_length() - 1
        if 2**e != s:
            raise ConfigError(
                f"arbitrary position splitting needs power-of-2 splits, got {s}"
            )
        exps.append(e)
    if depth < 1:
        raise ConfigError(f"depth must be >= 1, got {depth}")
    if depth > sum(exps):
        raise ConfigError(
            f"depth {depth} exceeds the {sum(exps)} halvings the grid supports"
        )

    root_key = ((0,) * ndim, (0,) * ndim)
    ids = {root_key: 0}
    order = [root_key]
    frontier = collections.deque([root_key])
    children_of = {}
    while frontier:
        key = frontier.popleft()
        counts, offsets = key
        total = sum(counts)
        groups = []
        if total < depth:
            for d in range(ndim):
                if counts[d] < exps[d]:
                    pair = []
                    for half in (0, 1):
                        ckey = (
                            counts[:d] + (counts[d] + 1,) + counts[d + 1:],
                            offsets[:d] + (2 * offsets[d] + half,) + offsets[d + 1:],
                        )
                        if ckey not in ids:
                            ids[ckey] = len(ids)
                            order.append(ckey)
                            frontier.append(ckey)
                        pair.append(ids[ckey])
                    groups.append(tuple(pair))
        children_of[key] = tuple(groups)

    nodes = []
    for key in order:
        counts, offsets = key
        lo = tuple(offsets[d] * (splits[d] >> counts[d]) for d in range(ndim))
        hi = tuple((offsets[d] + 1) * (splits[d] >> counts[d]) for d in range(ndim))
        nodes.append(Node(ids[key], _box_region(grid, lo, hi), children_of[key]))

    hs = max(len(nd.child_groups) for nd in nodes)
    params = StructureParams(
        kind="arbitrary-position-splitting",
        psi=2,
        hs=hs,
        a_r=lambda r: (_check_r(r) - 1) * depth,
        detail={"dims": ndim, "depth": depth, "leaf_boxes": 2**depth},
    )
    return ExplicitStructure(grid, nodes, 0, params)


BUILDER_KINDS = (
    "binary-tree",
    "kary-tree",
    "lexicographic",
    "kgroup-lexicographic",
    "arbitrary-splitting",
    "arbitrary-position-splitting",
)
