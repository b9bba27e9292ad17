"""
Tests for MultiwayDataset and validate
"""
import numpy as np
import pytest

from mwdml.data.dataset import ColumnMapping, MultiwayDataset, Observation, validate
from mwdml.errors import DatasetValidationError, EmptyInputError, SchemaError


def _grid_dataset(counts=(2, 3)):
    cells = np.array(list(np.ndindex(*counts))) + 1
    n = cells.shape[0]
    return MultiwayDataset(
        cluster_index=cells,
        cluster_counts=counts,
        y=np.arange(n, dtype=float),
        d=np.ones(n),
        z=np.ones(n),
        X=np.zeros((n, 2)),
    )


def test_full_grid_summary():
    dataset = _grid_dataset()
    report = validate(dataset)

    assert report.n_obs == 6
    assert report.min_clusters == 2
    assert report.max_occupancy == 1
    assert report.n_empty_cells == 0
    assert report.occupancy_histogram == {1: 6}


def test_empty_cells_and_repeated_cells():
    index = np.array([[1, 1], [1, 1], [1, 1], [2, 2]])
    dataset = MultiwayDataset(
        cluster_index=index, cluster_counts=(2, 2), y=np.zeros(4), d=np.zeros(4), z=np.zeros(4), X=np.zeros((4, 1))
    )
    report = validate(dataset)

    assert report.max_occupancy == 3
    assert report.n_empty_cells == 2
    assert report.occupancy_histogram == {0: 2, 1: 1, 3: 1}
    assert dataset.occupancy()[0, 0] == 3


def test_arrays_are_read_only():
    dataset = _grid_dataset()
    with pytest.raises(ValueError):
        dataset.y[0] = 10.0
    with pytest.raises(ValueError):
        dataset.cluster_index[0, 0] = 2


def test_index_out_of_range():
    dataset = MultiwayDataset(
        cluster_index=np.array([[1, 1], [3, 1]]),
        cluster_counts=(2, 2),
        y=np.zeros(2), d=np.zeros(2), z=np.zeros(2), X=np.zeros((2, 1)),
    )
    with pytest.raises(DatasetValidationError, match="out of declared range"):
        validate(dataset)


def test_non_finite_value():
    dataset = MultiwayDataset(
        cluster_index=np.array([[1, 1], [2, 2]]),
        cluster_counts=(2, 2),
        y=np.array([0.0, np.inf]), d=np.zeros(2), z=np.zeros(2), X=np.zeros((2, 1)),
    )
    with pytest.raises(DatasetValidationError, match="non-finite value in y"):
        validate(dataset)


def test_occupancy_above_recorded_maximum():
    dataset = MultiwayDataset(
        cluster_index=np.array([[1, 1], [1, 1]]),
        cluster_counts=(1, 1),
        y=np.zeros(2), d=np.zeros(2), z=np.zeros(2), X=np.zeros((2, 1)),
        max_occupancy=1,
    )
    with pytest.raises(DatasetValidationError, match="recorded maximum"):
        validate(dataset)


def test_length_mismatch():
    with pytest.raises(DatasetValidationError):
        MultiwayDataset(
            cluster_index=np.array([[1], [2]]), cluster_counts=(2,),
            y=np.zeros(3), d=np.zeros(2), z=np.zeros(2), X=np.zeros((2, 1)),
        )


def test_from_observations():
    observations = [
        Observation(cluster_index=(1, 2), y=1.0, d=2.0, z=3.0, x=np.array([0.1, 0.2])),
        Observation(cluster_index=(2, 1), y=4.0, d=5.0, z=6.0, x=np.array([0.3, 0.4])),
    ]
    dataset = MultiwayDataset.from_observations(observations, cluster_counts=(2, 2))

    assert dataset.n_obs == 2
    assert dataset.n_covariates == 2
    assert dataset.observations[1].cluster_index == (2, 1)
    np.testing.assert_array_equal(dataset.codes, [[0, 1], [1, 0]])


def test_from_no_observations():
    with pytest.raises(EmptyInputError):
        MultiwayDataset.from_observations([], cluster_counts=(1,))


def test_prefix_mapping_skips_model_columns():
    mapping = ColumnMapping(index_cols=("j1", "j2"), y_col="y", d_col="d", z_col="z", x_prefix="x")
    assert mapping.resolve_x(["j1", "j2", "y", "x1", "d", "x2", "z"]) == ["x1", "x2"]

    with pytest.raises(SchemaError):
        ColumnMapping(index_cols=("j1",), y_col="y", d_col="d", z_col="z", x_prefix="w").resolve_x(["j1", "y"])
