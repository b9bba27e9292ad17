"""
Tests for K^l-fold multiway cross fitting
"""
import itertools

import numpy as np
import pytest

from mwdml.crossfit.folds import (
    estimation_cells,
    fold_assignment,
    fold_masks,
    make_fold_plan,
    split_view,
    training_cells,
)
from mwdml.errors import InfeasiblePartitionError, InputError


def test_groups_partition_every_dimension():
    rng = np.random.default_rng(0)
    for _ in range(50):
        n_dims = int(rng.integers(1, 4))
        K = int(rng.integers(2, 4))
        counts = [int(c) for c in rng.integers(K, 9, size=n_dims)]
        plan = make_fold_plan(counts, K, seed=int(rng.integers(1_000)))

        for dim, C in enumerate(counts):
            members = [c for group in plan.groups[dim] for c in group]
            assert sorted(members) == list(range(1, C + 1))
            sizes = [len(g) for g in plan.groups[dim]]
            assert max(sizes) - min(sizes) <= 1
            assert sizes == sorted(sizes, reverse=True)


def test_remainder_goes_to_first_groups():
    plan = make_fold_plan([5, 4], K=2, seed=3)
    assert [len(g) for g in plan.groups[0]] == [3, 2]
    assert [len(g) for g in plan.groups[1]] == [2, 2]
    assert plan.group_sizes((0, 1)) == (3, 2)
    assert plan.n_cells((1, 0)) == 4


def test_same_seed_same_plan():
    assert make_fold_plan([7, 9], 3, 11) == make_fold_plan([7, 9], 3, 11)
    assert make_fold_plan([7, 9], 3, 11).to_json() == make_fold_plan([7, 9], 3, 11).to_json()


def test_dimensions_draw_independent_streams():
    # the first dimension's groups do not depend on how many dimensions follow
    assert make_fold_plan([8], 2, 5).groups[0] == make_fold_plan([8, 3], 2, 5).groups[0]


def test_estimation_cells_tile_the_grid():
    plan = make_fold_plan([4, 5], K=2, seed=1)
    all_cells = set(itertools.product(range(1, 5), range(1, 6)))
    seen = set()
    for fold in plan.folds():
        cells = estimation_cells(plan, fold)
        assert not cells & seen
        seen |= cells
    assert seen == all_cells


def test_training_cells_share_no_label_with_estimation_cells():
    plan = make_fold_plan([4, 4, 3], K=2, seed=9)
    for fold in plan.folds():
        score = estimation_cells(plan, fold)
        train = training_cells(plan, fold)
        assert not score & train
        for dim in range(3):
            assert not {c[dim] for c in score} & {c[dim] for c in train}


def test_two_by_two_figure():
    plan = make_fold_plan([4, 4], K=2, seed=0)
    assert plan.n_folds == 4
    for fold in plan.folds():
        assert len(estimation_cells(plan, fold)) == 4
        assert len(training_cells(plan, fold)) == 4


def test_masks_match_cells(make_dataset):
    rng = np.random.default_rng(2)
    dataset = make_dataset(rng, (5, 4))
    plan = make_fold_plan(dataset.cluster_counts, 2, seed=4)
    assignment = fold_assignment(plan, dataset.cluster_index)
    cells = [tuple(row) for row in dataset.cluster_index]
    covered = np.zeros(dataset.n_obs, dtype=int)
    for fold in plan.folds():
        estimation, training = fold_masks(assignment, fold)
        score = estimation_cells(plan, fold)
        train = training_cells(plan, fold)
        assert [c in score for c in cells] == list(estimation)
        assert [c in train for c in cells] == list(training)
        covered += estimation
    np.testing.assert_array_equal(covered, 1)


def test_relabel_moves_labels():
    plan = make_fold_plan([3], K=2, seed=0)
    reversed_labels = [[3, 2, 1]]
    moved = plan.relabel(reversed_labels)
    for old, new in zip(plan.groups[0], moved.groups[0]):
        assert sorted(4 - c for c in old) == list(new)


def test_fewer_clusters_than_k():
    with pytest.raises(InfeasiblePartitionError, match="fewer clusters"):
        make_fold_plan([5, 1], K=2, seed=0)
    with pytest.raises(InfeasiblePartitionError):
        make_fold_plan([5], K=1, seed=0)


def test_bad_fold_id():
    plan = make_fold_plan([4, 4], K=2, seed=0)
    with pytest.raises(ValueError):
        plan.group_sizes((2, 0))


def test_split_view_for_zero_way_makes_every_row_a_cluster(make_dataset):
    rng = np.random.default_rng(7)
    dataset = make_dataset(rng, (3, 4))
    view = split_view(dataset, "zero")

    assert view.cluster_counts == (dataset.n_obs,)
    np.testing.assert_array_equal(view.cluster_index[:, 0], np.arange(1, dataset.n_obs + 1))
    np.testing.assert_array_equal(view.y, dataset.y)
    np.testing.assert_array_equal(view.X, dataset.X)


def test_split_view_for_one_way_keeps_one_dimension(make_dataset):
    rng = np.random.default_rng(8)
    dataset = make_dataset(rng, (3, 5))
    view = split_view(dataset, "one:2")

    assert view.cluster_counts == (5,)
    np.testing.assert_array_equal(view.cluster_index[:, 0], dataset.cluster_index[:, 1])
    assert view.labels == (dataset.labels[1],)
    assert split_view(dataset, "multi") is dataset
    with pytest.raises(InputError, match="dimension 3"):
        split_view(dataset, "one:3")
