"""Shared fixtures: small structure instances and the ensemble protocol.

The structure zoo keeps every builder small enough that the full expert
mixture stays enumerable (at most 60 experts), which is what lets the
equivalence tests compare the learner against the explicit mixture oracle.
The session-scoped ensemble fixture runs the replicated synthetic protocol
once and serves every ordering assertion from the cached results.
"""

import math

import numpy as np
import pytest

from hsbandit import _kernels
from hsbandit.baselines import Exp3, SExp3, exp3_tuning
from hsbandit.environments import SinusoidalBernoulliEnv
from hsbandit.experts import FlatMixture
from hsbandit.grid import CellGrid
from hsbandit.hsb import HsbLearner
from hsbandit.structures import (
    build_arbitrary_position_splitting,
    build_arbitrary_splitting,
    build_binary_tree,
    build_kary_tree,
    build_kgroup_lexicographic,
    build_lexicographic_graph,
)

HORIZON = 100_000
DATASET_SEEDS = tuple(101 + i for i in range(10))
PRESENTATION_SEEDS = tuple(201 + i for i in range(10))


def make_structure_zoo():
    """(name, structure, num_arms) for all six builders, every mixture <= 60."""
    return [
        ("binary-tree", build_binary_tree(CellGrid((4,))), 2),
        ("kary-tree", build_kary_tree(CellGrid((3,)), 3), 3),
        ("lexicographic", build_lexicographic_graph(CellGrid((3,))), 2),
        ("kgroup-lexicographic",
         build_kgroup_lexicographic(CellGrid((3,)), 3), 3),
        ("arbitrary-splitting",
         build_arbitrary_splitting(CellGrid((3,)), arm_count=2), 2),
        ("arbitrary-position-splitting",
         build_arbitrary_position_splitting(CellGrid.uniform(2, 4), 1), 3),
    ]


@pytest.fixture(scope="session")
def structure_zoo():
    return make_structure_zoo()


def context_for_cell(grid: CellGrid, cell: int):
    center = grid.cell_center(cell)
    return center[0] if grid.dims == 1 else center


def run_against_mixture(structure, num_arms, eta, rounds, seed):
    """Drive learner and enumerated mixture through one shared random history.

    Returns the worst per-round deviations: (max |simplex diff|, max relative
    root-weight error, max relative prior-sum error at t=1).
    """
    learner = HsbLearner(structure, num_arms, eta)
    mixture = FlatMixture.from_structure(structure, num_arms, eta)
    rng = np.random.default_rng(seed)
    n_cells = structure.grid.total_cells
    root = structure.root_id
    prior_err = abs(float(np.exp(mixture.log_weights).sum()) - 1.0)
    worst_p = worst_w = 0.0
    for _ in range(rounds):
        cell = int(rng.integers(n_cells))
        p_learner = learner.simplex_at(cell)
        p_mixture = mixture.simplex(cell)
        worst_p = max(worst_p, float(np.abs(p_learner - p_mixture).max()))
        mix_total = float(np.exp(mixture.log_weights).sum())
        root_w = math.exp(learner.log_w(root))
        worst_w = max(worst_w, abs(root_w - mix_total) / mix_total)
        decision = learner.select_arm(
            context_for_cell(structure.grid, cell), rng
        )
        loss = float(rng.random())
        learner.update(decision, loss)
        mixture.apply_feedback(cell, decision.arm,
                               decision.chosen_probability, loss)
    return worst_p, worst_w, prior_err


@pytest.fixture(scope="session")
def oracle_deviation(structure_zoo):
    """Worst learner-vs-mixture deviations over 50 seeds x 200 rounds each."""
    import time

    start = time.perf_counter()
    results = {}
    for name, structure, num_arms in structure_zoo:
        worst = (0.0, 0.0, 0.0)
        for seed in range(50):
            out = run_against_mixture(structure, num_arms, 0.08, 200, seed)
            worst = tuple(max(a, b) for a, b in zip(worst, out))
        results[name] = worst
    results["elapsed"] = time.perf_counter() - start
    return results


def _ensemble(make_algo, grid, model, horizon=HORIZON):
    env = SinusoidalBernoulliEnv(horizon, switched=(model == "switched"))
    finals, last_quarters = [], []
    tail = 3 * horizon // 4
    for dataset_seed in DATASET_SEEDS:
        contexts, losses = env.generate(np.random.default_rng(dataset_seed))
        cells = (grid.cells_of(contexts) if grid is not None
                 else np.zeros(horizon, dtype=np.int64))
        for algo_seed in PRESENTATION_SEEDS:
            algo = make_algo()
            rng = np.random.default_rng(
                np.random.SeedSequence([dataset_seed, algo_seed])
            )
            _, incurred, _ = algo.run_bandit_rounds(cells, losses, rng)
            finals.append(incurred.sum() / horizon)
            last_quarters.append(incurred[tail:].sum() / (horizon - tail))
    return float(np.mean(finals)), float(np.mean(last_quarters))


@pytest.fixture(scope="session")
def ordering_ensembles():
    """Final and last-quarter mean losses for the replicated protocol.

    Learning rates follow the handicapped fair-comparison policy: the
    hierarchical learner at depth d copies the per-cell baseline's rate at the
    same grid, so depth comparisons are apples to apples.
    """
    _kernels.warm_up()
    results = {}
    for model in ("stationary", "switched"):
        for depth in (2, 5, 10):
            n = 2**depth
            grid = CellGrid((n,))
            structure = build_binary_tree(grid)
            eta = exp3_tuning(3, max(1.0, HORIZON / n))[1]
            results[f"hsb-bt-d{depth}", model] = _ensemble(
                lambda: HsbLearner(structure, 3, eta), grid, model
            )
        grid = CellGrid((32,))
        results["sexp3-d5", model] = _ensemble(
            lambda: SExp3(grid, 3, HORIZON), grid, model
        )
        results["exp3", model] = _ensemble(
            lambda: Exp3(3, HORIZON), None, model
        )
    return results
