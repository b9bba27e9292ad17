"""
Multiway-clustered datasets

Observations carry an l-dimensional cluster index j = (j_1, ..., j_l) with
1 <= j_i <= C_i. A cell (one value of j) may hold zero, one or several
observations; empty cells contribute zero to every downstream sum.
"""
import logging
from dataclasses import dataclass, field
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np

from mwdml.errors import DatasetValidationError, EmptyInputError, SchemaError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class ColumnMapping:
    """Which CSV columns hold the cluster indices and the model variables"""
    index_cols: Tuple[str, ...]
    y_col: str
    d_col: str
    z_col: str
    x_cols: Optional[Tuple[str, ...]] = None
    x_prefix: Optional[str] = None

    def resolve_x(self, columns: Sequence[str]) -> List[str]:
        """
        Covariate column names, in file order when a prefix rule is used.

        Args:
            columns: Header of the CSV

        Returns:
            List of covariate column names
        """
        if self.x_cols:
            return list(self.x_cols)
        if self.x_prefix:
            taken = set(self.index_cols) | {self.y_col, self.d_col, self.z_col}
            found = [c for c in columns if c.startswith(self.x_prefix) and c not in taken]
            if not found:
                raise SchemaError(f"no column starts with x_prefix {self.x_prefix!r}", column=self.x_prefix)
            return found
        raise SchemaError("schema names neither x_cols nor x_prefix")

    @classmethod
    def default(cls, n_dims: int, n_covariates: int) -> "ColumnMapping":
        return cls(
            index_cols=tuple(f"j{i + 1}" for i in range(n_dims)),
            y_col="y",
            d_col="d",
            z_col="z",
            x_cols=tuple(f"x{k + 1}" for k in range(n_covariates)),
        )


@dataclass(frozen=True)
class Observation:
    """One unit w = (y, d, x, z) in cell cluster_index"""
    cluster_index: Tuple[int, ...]
    y: float
    d: float
    z: float
    x: np.ndarray


@dataclass(frozen=True)
class ValidationReport:
    n_obs: int
    n_dims: int
    cluster_counts: Tuple[int, ...]
    min_clusters: int
    max_occupancy: int
    occupancy_histogram: Dict[int, int]
    n_empty_cells: int
    n_covariates: int

    def to_dict(self) -> dict:
        return {
            "n_obs": self.n_obs,
            "n_dims": self.n_dims,
            "cluster_counts": list(self.cluster_counts),
            "min_clusters": self.min_clusters,
            "max_occupancy": self.max_occupancy,
            "occupancy_histogram": {str(k): v for k, v in self.occupancy_histogram.items()},
            "n_empty_cells": self.n_empty_cells,
            "n_covariates": self.n_covariates,
        }


def _frozen(array: np.ndarray) -> np.ndarray:
    array.setflags(write=False)
    return array


@dataclass(frozen=True)
class MultiwayDataset:
    """
    Immutable l-way clustered sample.

    Attributes:
        cluster_index: (n, l) integer array of 1-based cluster labels
        cluster_counts: Declared number of clusters C_i per dimension
        y, d, z: Outcome, endogenous regressor and instrument, shape (n,)
        X: Covariates, shape (n, p)
        labels: Original label of every dense code, per dimension
        schema: Column names the data was read with (used on export)
        max_occupancy: Recorded N-bar, the largest number of observations in one cell
    """
    cluster_index: np.ndarray
    cluster_counts: Tuple[int, ...]
    y: np.ndarray
    d: np.ndarray
    z: np.ndarray
    X: np.ndarray
    labels: Optional[Tuple[Tuple[str, ...], ...]] = None
    schema: Optional[ColumnMapping] = None
    max_occupancy: Optional[int] = field(default=None)

    def __post_init__(self):
        index = np.asarray(self.cluster_index, dtype=np.int64)
        if index.ndim == 1:
            index = index[:, None]
        X = np.asarray(self.X, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        n = index.shape[0]
        arrays = {}
        for name in ("y", "d", "z"):
            arr = np.asarray(getattr(self, name), dtype=float).reshape(-1)
            if arr.shape[0] != n:
                raise DatasetValidationError(f"{name} has {arr.shape[0]} entries for {n} observations")
            arrays[name] = _frozen(arr.copy())
        if X.shape[0] != n:
            raise DatasetValidationError(f"X has {X.shape[0]} rows for {n} observations")
        counts = tuple(int(c) for c in self.cluster_counts)
        if len(counts) != index.shape[1]:
            raise DatasetValidationError(
                f"{index.shape[1]} index columns but {len(counts)} cluster counts"
            )
        if any(c < 1 for c in counts):
            raise DatasetValidationError(f"cluster counts must be positive, got {counts}")

        object.__setattr__(self, "cluster_index", _frozen(index.copy()))
        object.__setattr__(self, "X", _frozen(X.copy()))
        object.__setattr__(self, "cluster_counts", counts)
        for name, arr in arrays.items():
            object.__setattr__(self, name, arr)
        if self.labels is None:
            object.__setattr__(
                self, "labels", tuple(tuple(str(c + 1) for c in range(C)) for C in counts)
            )
        if self.max_occupancy is None and n > 0 and self._in_range():
            object.__setattr__(self, "max_occupancy", int(self.occupancy().max()))

    @classmethod
    def from_observations(
        cls,
        observations: Sequence[Observation],
        cluster_counts: Sequence[int],
        schema: Optional[ColumnMapping] = None,
    ) -> "MultiwayDataset":
        """Build a dataset from a list of Observation records."""
        if not observations:
            raise EmptyInputError()
        widths = {len(np.atleast_1d(o.x)) for o in observations}
        if len(widths) != 1:
            raise DatasetValidationError(f"inconsistent covariate lengths {sorted(widths)}")
        return cls(
            cluster_index=np.array([o.cluster_index for o in observations], dtype=np.int64),
            cluster_counts=tuple(cluster_counts),
            y=np.array([o.y for o in observations], dtype=float),
            d=np.array([o.d for o in observations], dtype=float),
            z=np.array([o.z for o in observations], dtype=float),
            X=np.vstack([np.atleast_1d(np.asarray(o.x, dtype=float)) for o in observations]),
            schema=schema,
        )

    @property
    def n_obs(self) -> int:
        return int(self.cluster_index.shape[0])

    @property
    def n_dims(self) -> int:
        return int(self.cluster_index.shape[1])

    @property
    def n_covariates(self) -> int:
        return int(self.X.shape[1])

    @property
    def min_clusters(self) -> int:
        """Effective sample size C-underbar = min_i C_i."""
        return min(self.cluster_counts)

    @property
    def codes(self) -> np.ndarray:
        """Zero-based cluster labels, shape (n, l)."""
        return self.cluster_index - 1

    @property
    def observations(self) -> List[Observation]:
        return [
            Observation(
                cluster_index=tuple(int(j) for j in self.cluster_index[r]),
                y=float(self.y[r]),
                d=float(self.d[r]),
                z=float(self.z[r]),
                x=self.X[r],
            )
            for r in range(self.n_obs)
        ]

    def _in_range(self) -> bool:
        return bool(np.all(self.cluster_index >= 1) and np.all(self.cluster_index <= np.array(self.cluster_counts)))

    def occupancy(self) -> np.ndarray:
        """Observation count N_j of every cell, as an array of shape cluster_counts."""
        flat = np.ravel_multi_index(tuple(self.codes.T), self.cluster_counts)
        counts = np.bincount(flat, minlength=int(np.prod(self.cluster_counts)))
        return counts.reshape(self.cluster_counts)

    def label_of(self, dim: int, code: int) -> str:
        """Original label for the 1-based code in dimension dim (0-based)."""
        return self.labels[dim][code - 1]


def validate(dataset: MultiwayDataset) -> ValidationReport:
    """
    Check the dataset invariants and summarize its cluster structure.

    Args:
        dataset: Dataset to check

    Returns:
        ValidationReport with C-underbar, occupancy histogram and empty-cell count

    Raises:
        EmptyInputError: no observations
        DatasetValidationError: index out of range, non-finite value, or
            occupancy above the recorded maximum
    """
    if dataset.n_obs == 0:
        raise EmptyInputError()

    counts = np.array(dataset.cluster_counts)
    bad = np.flatnonzero(np.any((dataset.cluster_index < 1) | (dataset.cluster_index > counts), axis=1))
    if bad.size:
        r = int(bad[0])
        raise DatasetValidationError(
            f"index out of declared range: observation {r} has j={tuple(int(j) for j in dataset.cluster_index[r])} "
            f"but C={tuple(dataset.cluster_counts)}"
        )

    for name in ("y", "d", "z", "X"):
        values = getattr(dataset, name)
        finite = np.isfinite(values)
        if not finite.all():
            r = int(np.flatnonzero(~finite.reshape(dataset.n_obs, -1).all(axis=1))[0])
            raise DatasetValidationError(f"non-finite value in {name} at observation {r}")

    if len(dataset.labels) != dataset.n_dims or any(
        len(lab) != C for lab, C in zip(dataset.labels, dataset.cluster_counts)
    ):
        raise DatasetValidationError("label map does not match the declared cluster counts")

    occupancy = dataset.occupancy()
    n_bar = int(occupancy.max())
    if dataset.max_occupancy is not None and n_bar > dataset.max_occupancy:
        raise DatasetValidationError(
            f"a cell holds {n_bar} observations, above the recorded maximum {dataset.max_occupancy}"
        )
    histogram = np.bincount(occupancy.ravel())

    report = ValidationReport(
        n_obs=dataset.n_obs,
        n_dims=dataset.n_dims,
        cluster_counts=tuple(dataset.cluster_counts),
        min_clusters=dataset.min_clusters,
        max_occupancy=n_bar,
        occupancy_histogram={k: int(v) for k, v in enumerate(histogram) if v},
        n_empty_cells=int(histogram[0]) if histogram.size else 0,
        n_covariates=dataset.n_covariates,
    )
    logger.debug(f"Validated dataset: {report.to_dict()}")
    return report
