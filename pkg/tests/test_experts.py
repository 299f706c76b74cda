import csv
import math

import numpy as np
import pytest
from conftest import make_structure_zoo

from hsbandit.errors import CapacityError, DomainError, ShapeError
from hsbandit.experts import (
    FlatMixture,
    FlatMixtureBandit,
    WeightedExpert,
    count_experts,
    enumerate_weighted_experts,
    experts_to_csv,
    total_log_weight,
    total_weight,
)
from hsbandit.grid import CellGrid
from hsbandit.structures import build_binary_tree

ZOO = make_structure_zoo()
ZOO_IDS = [z[0] for z in ZOO]

# Root expert counts of the zoo structures, frozen from the recursion
# count(node) = M + sum over groups of prod(count(child)).
ZOO_EXPERT_COUNTS = {
    "binary-tree": 38,
    "kary-tree": 30,
    "lexicographic": 26,
    "kgroup-lexicographic": 30,
    "arbitrary-splitting": 38,
    "arbitrary-position-splitting": 21,
}


class TestCounting:
    @pytest.mark.parametrize("name,structure,num_arms", ZOO, ids=ZOO_IDS)
    def test_count_matches_enumeration(self, name, structure, num_arms):
        n = count_experts(structure, structure.root_id, num_arms)
        assert n == ZOO_EXPERT_COUNTS[name]
        assert len(
            enumerate_weighted_experts(structure, structure.root_id, num_arms)
        ) == n

    def test_binary_tree_count_by_hand(self):
        st = build_binary_tree(CellGrid((4,)))
        leaf = next(nid for nid in st.node_ids() if st.node(nid).is_leaf)
        internal = st.node(st.root_id).child_groups[0][0]
        assert count_experts(st, leaf, 2) == 2
        assert count_experts(st, internal, 2) == 2 + 2 * 2
        assert count_experts(st, st.root_id, 2) == 2 + 6 * 6

    def test_bad_arm_count(self):
        st = build_binary_tree(CellGrid((2,)))
        with pytest.raises(DomainError):
            count_experts(st, st.root_id, 0)

    def test_enumeration_cap(self):
        st = build_binary_tree(CellGrid((4,)))
        with pytest.raises(CapacityError):
            enumerate_weighted_experts(st, st.root_id, 2, cap=37)


class TestPriors:
    @pytest.mark.parametrize("name,structure,num_arms", ZOO, ids=ZOO_IDS)
    def test_priors_sum_to_one_at_every_node(self, name, structure, num_arms):
        for nid in structure.node_ids():
            experts = enumerate_weighted_experts(structure, nid, num_arms)
            assert math.isclose(
                sum(ex.prior for ex in experts), 1.0, abs_tol=1e-12
            )

    def test_two_cell_tree_prior_multiset(self):
        st = build_binary_tree(CellGrid((2,)))
        experts = enumerate_weighted_experts(st, st.root_id, 2)
        assert sorted(ex.prior for ex in experts) == [
            0.125, 0.125, 0.125, 0.125, 0.25, 0.25,
        ]

    def test_constant_experts_cover_whole_region(self):
        st = build_binary_tree(CellGrid((4,)))
        experts = enumerate_weighted_experts(st, st.root_id, 2)
        full = [ex for ex in experts if len(ex.mapping) == 4]
        assert len(full) == len(experts)  # root experts map every cell
        constants = [
            ex for ex in experts
            if len({arm for _, arm in ex.mapping}) == 1 and ex.prior == 0.25
        ]
        assert len(constants) == 2


class TestTotalWeight:
    def test_one_round_hand_value(self):
        st = build_binary_tree(CellGrid((2,)))
        history = [(0, [1.0, 0.0])]
        w = total_weight(st, st.root_id, 2, 1.0, history)
        expect = 0.25 * math.exp(-1) + 0.25 + 0.125 * (2 * math.exp(-1) + 2)
        assert math.isclose(w, expect, rel_tol=1e-12)
        assert math.isclose(w, 0.6839397205857212, rel_tol=1e-12)

    def test_fresh_weight_is_one(self):
        for _, st, m in ZOO:
            assert math.isclose(
                total_weight(st, st.root_id, m, 0.5, []), 1.0, abs_tol=1e-12
            )

    def test_matches_direct_sum(self):
        st = build_binary_tree(CellGrid((4,)))
        rng = np.random.default_rng(7)
        history = [
            (int(rng.integers(4)), rng.random(2)) for _ in range(25)
        ]
        eta = 0.3
        experts = enumerate_weighted_experts(st, st.root_id, 2)
        direct = 0.0
        for ex in experts:
            acc = sum(loss[ex.arm_at(c)] for c, loss in history)
            direct += ex.prior * math.exp(-eta * acc)
        got = total_log_weight(st, st.root_id, 2, eta, history)
        assert math.isclose(got, math.log(direct), rel_tol=1e-12)

    def test_out_of_region_rounds_ignored(self):
        st = build_binary_tree(CellGrid((4,)))
        leaf0 = st.nodes_containing(0)[0]
        with_noise = total_log_weight(
            st, leaf0, 2, 1.0, [(0, [0.5, 0.1]), (3, [1.0, 1.0])]
        )
        without = total_log_weight(st, leaf0, 2, 1.0, [(0, [0.5, 0.1])])
        assert with_noise == without


class TestWeightedExpert:
    def test_arm_lookup(self):
        ex = WeightedExpert(0.5, ((0, 1), (2, 0)))
        assert ex.arm_at(0) == 1
        assert ex.arm_at(2) == 0
        assert ex.as_dict() == {0: 1, 2: 0}

    def test_outside_region_rejected(self):
        ex = WeightedExpert(0.5, ((0, 1),))
        with pytest.raises(DomainError):
            ex.arm_at(1)


class TestFlatMixture:
    def test_uniform_mixture_four_cells_two_arms_has_16_experts(self):
        mix = FlatMixture.uniform(4, 2, 0.1)
        assert len(mix.experts) == 16
        assert all(ex.prior == 1 / 16 for ex in mix.experts)

    def test_uniform_cap(self):
        with pytest.raises(CapacityError):
            FlatMixture.uniform(20, 2, 0.1)

    def test_fresh_simplex_is_uniform(self):
        mix = FlatMixture.uniform(3, 4, 0.2)
        for cell in range(3):
            np.testing.assert_allclose(mix.simplex(cell), np.full(4, 0.25))

    def test_feedback_shifts_mass_away_from_punished_arm(self):
        mix = FlatMixture.uniform(2, 2, 0.5)
        mix.apply_feedback(cell=0, chosen_arm=0, p_chosen=0.5, loss=1.0)
        p = mix.simplex(0)
        assert p[0] < 0.5 < p[1]
        # the other cell's marginal is untouched under uniform priors
        np.testing.assert_allclose(mix.simplex(1), [0.5, 0.5])

    def test_feedback_matches_manual_reweighting(self):
        mix = FlatMixture.uniform(2, 2, 0.3)
        mix.apply_feedback(0, 1, 0.25, 0.6)
        ltilde = 0.6 / 0.25
        logs = np.log(np.full(4, 0.25))
        for i, ex in enumerate(mix.experts):
            if ex.arm_at(0) == 1:
                logs[i] -= 0.3 * ltilde
        scaled = np.exp(logs - logs.max())
        arms = np.array([ex.arm_at(0) for ex in mix.experts])
        manual = np.array(
            [scaled[arms == m].sum() for m in range(2)]
        ) / scaled.sum()
        np.testing.assert_allclose(mix.simplex(0), manual, rtol=1e-12)

    def test_validation_errors(self):
        with pytest.raises(DomainError):
            FlatMixture.uniform(2, 2, 0.0)
        with pytest.raises(ShapeError):
            FlatMixture([], 2, 0.1)
        partial = [WeightedExpert(1.0, ((1, 0),))]
        with pytest.raises(ShapeError):
            FlatMixture(partial, 2, 0.1)
        mix = FlatMixture.uniform(2, 2, 0.1)
        with pytest.raises(DomainError):
            mix.apply_feedback(0, 0, 0.0, 0.5)
        with pytest.raises(DomainError):
            mix.apply_feedback(0, 2, 0.5, 0.5)
        with pytest.raises(DomainError):
            mix.simplex(5)

    def test_from_structure_uses_recursive_priors(self):
        st = build_binary_tree(CellGrid((2,)))
        mix = FlatMixture.from_structure(st, 2, 0.4)
        assert sorted(ex.prior for ex in mix.experts) == [
            0.125, 0.125, 0.125, 0.125, 0.25, 0.25,
        ]


class TestFlatMixtureBandit:
    def test_select_update_round_trip(self):
        grid = CellGrid((2,))
        bandit = FlatMixtureBandit(FlatMixture.uniform(2, 2, 0.5), grid)
        rng = np.random.default_rng(3)
        dec = bandit.select(0.1, rng)
        assert dec.cell == 0
        np.testing.assert_allclose(dec.simplex, [0.5, 0.5])
        bandit.update(dec, 1.0)
        assert bandit.mixture.simplex(0)[dec.arm] < 0.5

    def test_grid_mismatch_rejected(self):
        with pytest.raises(ShapeError):
            FlatMixtureBandit(FlatMixture.uniform(2, 2, 0.5), CellGrid((4,)))


class TestCsvDump:
    def test_round_trip(self, tmp_path):
        st = build_binary_tree(CellGrid((2,)))
        experts = enumerate_weighted_experts(st, st.root_id, 2)
        path = tmp_path / "experts.csv"
        experts_to_csv(experts, path)
        with open(path, newline="") as fh:
            rows = list(csv.reader(fh))
        assert rows[0] == ["prior", "arm_cell_0", "arm_cell_1"]
        assert len(rows) == 1 + len(experts)
        assert [float(r[0]) for r in rows[1:]] == [ex.prior for ex in experts]

    def test_empty_rejected(self, tmp_path):
        with pytest.raises(ShapeError):
            experts_to_csv([], tmp_path / "x.csv")
