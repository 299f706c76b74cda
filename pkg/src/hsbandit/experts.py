"""Enumerated region-to-arm mapping experts and flat exponential-weight mixtures.

This module is the brute-force counterpart of the hierarchical learner: it
materializes the full weighted expert multiset that a structure node encodes and
runs plain exponential weights over it. The hierarchical recursions are checked
against these enumerations, so nothing here may depend on the learner.
"""

from __future__ import annotations

import csv
import itertools
import math
from dataclasses import dataclass

import numpy as np

from .decision import AlternationGuard, ArmDecision, check_loss, sample_arm
from .errors import CapacityError, DomainError, ShapeError
from .grid import CellGrid
from .regions import region_cells
from .structures import Structure

EXPERT_CAP = 100_000


@dataclass(frozen=True)
class WeightedExpert:
    """A fixed cell-to-arm mapping with a prior weight."""

    prior: float
    mapping: tuple[tuple[int, int], ...]  # sorted (cell, arm) pairs

    def arm_at(self, cell: int) -> int:
        for c, m in self.mapping:
            if c == cell:
                return m
        raise DomainError(f"cell {cell} outside this expert's region")

    def as_dict(self) -> dict[int, int]:
        return dict(self.mapping)


def count_experts(structure: Structure, node_id: int, num_arms: int) -> int:
    """Size of the expert multiset at a node, without materializing it."""
    if num_arms < 1:
        raise DomainError(f"num_arms must be >= 1, got {num_arms}")
    memo: dict[int, int] = {}

    def count(nid):
        if nid in memo:
            return memo[nid]
        total = num_arms
        for group in structure.child_groups_of(nid):
            prod = 1
            for child in group:
                prod *= count(child)
            total += prod
        memo[nid] = total
        return total

    return count(node_id)


def enumerate_weighted_experts(
    structure: Structure, node_id: int, num_arms: int, cap: int = EXPERT_CAP
) -> list[WeightedExpert]:
    """All experts a node encodes, with their recursive prior weights.

    A node with k child groups contributes num_arms constant experts with prior
    1/((k+1)*num_arms) each, plus, for every group, the cross product of the
    child expert lists stitched together with prior 1/(k+1) times the product of
    the child priors. Duplicated mappings are kept as distinct entries; priors
    at each node sum to exactly 1.
    """
    n = count_experts(structure, node_id, num_arms)
    if n > cap:
        raise CapacityError(
            f"node {node_id} encodes {n} experts, enumeration cap is {cap}"
        )
    memo: dict[int, list[WeightedExpert]] = {}

    def enum(nid):
        if nid in memo:
            return memo[nid]
        groups = structure.child_groups_of(nid)
        share = 1.0 / (len(groups) + 1)
        cells = tuple(region_cells(structure.region_of(nid)))
        experts = [
            WeightedExpert(share / num_arms, tuple((c, m) for c in cells))
            for m in range(num_arms)
        ]
        for group in groups:
            child_lists = [enum(child) for child in group]
            for combo in itertools.product(*child_lists):
                prior = share
                merged: list[tuple[int, int]] = []
                for part in combo:
                    prior *= part.prior
                    merged.extend(part.mapping)
                experts.append(WeightedExpert(prior, tuple(sorted(merged))))
        memo[nid] = experts
        return experts

    return enum(node_id)


def total_log_weight(
    structure: Structure, node_id: int, num_arms: int, eta: float, history
) -> float:
    """log of the summed expert weights at a node after a loss history.

    history is a sequence of (cell, estimated_loss_vector) pairs; rounds whose
    cell falls outside the node's region leave its experts untouched.
    """
    experts = enumerate_weighted_experts(structure, node_id, num_arms)
    logs = np.empty(len(experts))
    for i, ex in enumerate(experts):
        mapping = ex.as_dict()
        acc = 0.0
        for cell, losses in history:
            arm = mapping.get(cell)
            if arm is not None:
                acc += float(losses[arm])
        logs[i] = math.log(ex.prior) - eta * acc
    mx = logs.max()
    return float(mx + math.log(np.exp(logs - mx).sum()))


def total_weight(structure, node_id, num_arms, eta, history) -> float:
    return math.exp(total_log_weight(structure, node_id, num_arms, eta, history))


def experts_to_csv(experts, path) -> None:
    """Dump (prior, arm per cell) rows; columns follow the sorted cell ids."""
    if not experts:
        raise ShapeError("no experts to dump")
    cells = [c for c, _ in experts[0].mapping]
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh)
        writer.writerow(["prior"] + [f"arm_cell_{c}" for c in cells])
        for ex in experts:
            mapping = ex.as_dict()
            if sorted(mapping) != cells:
                raise ShapeError("experts cover different cell sets")
            writer.writerow([repr(ex.prior)] + [mapping[c] for c in cells])


class FlatMixture(AlternationGuard):
    """Exponential weights over an explicit expert list.

    Importance-weighted losses feed every expert whose mapping agrees with the
    chosen arm at the observed cell, so the mixture only ever uses bandit
    feedback.
    """

    def __init__(self, experts, num_arms: int, eta: float):
        super().__init__()
        if eta <= 0.0:
            raise DomainError(f"eta must be positive, got {eta}")
        if not experts:
            raise ShapeError("mixture needs at least one expert")
        self.experts = list(experts)
        self.num_arms = int(num_arms)
        self.eta = float(eta)
        self.log_weights = np.array([math.log(ex.prior) for ex in self.experts])
        cells = sorted({c for ex in self.experts for c, _ in ex.mapping})
        if cells != list(range(len(cells))):
            raise ShapeError("flat mixture experts must jointly cover cells 0..N-1")
        self._arm_table = np.empty((len(self.experts), len(cells)), dtype=np.int64)
        for i, ex in enumerate(self.experts):
            mapping = ex.as_dict()
            if len(mapping) != len(cells):
                raise ShapeError("flat mixture experts must each cover every cell")
            for c in cells:
                self._arm_table[i, c] = mapping[c]
        self.t = 1

    @classmethod
    def from_structure(cls, structure: Structure, num_arms: int, eta: float,
                       cap: int = EXPERT_CAP) -> "FlatMixture":
        """Mixture over the root's enumerated experts with recursive priors."""
        experts = enumerate_weighted_experts(
            structure, structure.root_id, num_arms, cap=cap
        )
        return cls(experts, num_arms, eta)

    @classmethod
    def uniform(cls, n_cells: int, num_arms: int, eta: float,
                cap: int = EXPERT_CAP) -> "FlatMixture":
        """Mixture over all num_arms**n_cells mappings with equal priors."""
        total = num_arms**n_cells
        if total > cap:
            raise CapacityError(
                f"{num_arms}**{n_cells} = {total} experts exceeds the cap {cap}"
            )
        prior = 1.0 / total
        experts = [
            WeightedExpert(prior, tuple(enumerate(arms)))
            for arms in itertools.product(range(num_arms), repeat=n_cells)
        ]
        return cls(experts, num_arms, eta)

    def simplex(self, cell: int) -> np.ndarray:
        """Arm distribution at a cell: total normalized weight per arm."""
        arms = self._arm_table[:, self._check_cell(cell)]
        lw = self.log_weights
        mx = lw.max()
        scaled = np.exp(lw - mx)
        total = scaled.sum()
        p = np.zeros(self.num_arms)
        for m in range(self.num_arms):
            p[m] = scaled[arms == m].sum() / total
        return p

    def _check_cell(self, cell: int) -> int:
        cell = int(cell)
        if not 0 <= cell < self._arm_table.shape[1]:
            raise DomainError(
                f"cell {cell} outside 0..{self._arm_table.shape[1] - 1}"
            )
        return cell

    def apply_feedback(self, cell: int, chosen_arm: int, p_chosen: float,
                       loss: float) -> None:
        """Importance-weighted update from one bandit observation."""
        cell = self._check_cell(cell)
        loss = check_loss(loss)
        if not 0.0 < p_chosen <= 1.0:
            raise DomainError(f"p_chosen must lie in (0,1], got {p_chosen}")
        if not 0 <= chosen_arm < self.num_arms:
            raise DomainError(f"arm {chosen_arm} outside 0..{self.num_arms - 1}")
        ltilde = loss / p_chosen
        mask = self._arm_table[:, cell] == chosen_arm
        self.log_weights[mask] -= self.eta * ltilde
        self.t += 1


class FlatMixtureBandit(AlternationGuard):
    """Select/update wrapper that runs a FlatMixture as a contextual bandit."""

    def __init__(self, mixture: FlatMixture, grid: CellGrid):
        super().__init__()
        if grid.total_cells != mixture._arm_table.shape[1]:
            raise ShapeError(
                f"grid has {grid.total_cells} cells, mixture covers "
                f"{mixture._arm_table.shape[1]}"
            )
        self.mixture = mixture
        self.grid = grid

    @property
    def num_arms(self) -> int:
        return self.mixture.num_arms

    def select(self, context, rng) -> ArmDecision:
        cell = self.grid.cell_of(context)
        p = self.mixture.simplex(cell)
        return self._issue(ArmDecision(sample_arm(p, rng), cell, p))

    def update(self, decision: ArmDecision, loss: float) -> None:
        self._consume(decision)
        self.mixture.apply_feedback(
            decision.cell, decision.arm, decision.chosen_probability, loss
        )
