"""
K^l-fold multiway cross fitting

Each dimension's cluster labels are shuffled and cut into K near-equal
groups. Fold k = (k_1, ..., k_l) evaluates scores on the product of the
chosen groups and fits nuisances on the product of their complements, so
no cluster label in any dimension is shared between the two.

Fold ids and group positions are zero-based; cells are 1-based cluster
labels, as stored on MultiwayDataset.

A matched split instead partitions only the units a reference variance treats
as independent: single observations for zero-way inference, or the clusters
of one dimension for one-way inference (split_view).
"""
import itertools
import json
import logging
from dataclasses import dataclass
from typing import Dict, Iterator, List, Sequence, Set, Tuple

import numpy as np

from mwdml.config.schema import robustness_mode
from mwdml.data.dataset import MultiwayDataset
from mwdml.errors import InfeasiblePartitionError, InputError
from mwdml.utils.seeding import child_rng

logger = logging.getLogger(__name__)

Fold = Tuple[int, ...]
Cell = Tuple[int, ...]


@dataclass(frozen=True)
class FoldPlan:
    """
    Per-dimension partition of cluster labels into K groups.

    Attributes:
        K: Number of groups per dimension
        seed: Seed the plan was drawn from
        cluster_counts: C_i per dimension
        groups: groups[i][k] is the sorted tuple of 1-based labels of group k in dimension i
    """
    K: int
    seed: int
    cluster_counts: Tuple[int, ...]
    groups: Tuple[Tuple[Tuple[int, ...], ...], ...]

    @property
    def n_dims(self) -> int:
        return len(self.cluster_counts)

    @property
    def n_folds(self) -> int:
        return self.K ** self.n_dims

    def folds(self) -> Iterator[Fold]:
        """All fold ids of [K]^l in lexicographic order."""
        return itertools.product(range(self.K), repeat=self.n_dims)

    def group_lookup(self, dim: int) -> np.ndarray:
        """Array mapping zero-based label of dimension dim to its group position."""
        lookup = np.empty(self.cluster_counts[dim], dtype=np.int64)
        for k, members in enumerate(self.groups[dim]):
            lookup[np.asarray(members, dtype=np.int64) - 1] = k
        return lookup

    def group_sizes(self, fold: Fold) -> Tuple[int, ...]:
        """|I_{k_i}| for each dimension of the fold."""
        self._check_fold(fold)
        return tuple(len(self.groups[i][k]) for i, k in enumerate(fold))

    def n_cells(self, fold: Fold) -> int:
        """|I_k|, the number of cells (empty ones included) in the fold."""
        return int(np.prod(self.group_sizes(fold)))

    def relabel(self, permutations: Sequence[Sequence[int]]) -> "FoldPlan":
        """
        Plan obtained by renaming labels; permutations[i][c - 1] is the new label of c.
        """
        groups = tuple(
            tuple(tuple(sorted(int(perm[c - 1]) for c in members)) for members in dim_groups)
            for perm, dim_groups in zip(permutations, self.groups)
        )
        return FoldPlan(K=self.K, seed=self.seed, cluster_counts=self.cluster_counts, groups=groups)

    def to_dict(self) -> Dict:
        return {
            "K": self.K,
            "seed": self.seed,
            "cluster_counts": list(self.cluster_counts),
            "groups": {
                str(i + 1): [list(members) for members in dim_groups]
                for i, dim_groups in enumerate(self.groups)
            },
        }

    def to_json(self, **kwargs) -> str:
        return json.dumps(self.to_dict(), **kwargs)

    def _check_fold(self, fold: Fold):
        if len(fold) != self.n_dims or any(not 0 <= k < self.K for k in fold):
            raise ValueError(f"crossfit: fold {tuple(fold)} is not in [0, {self.K})^{self.n_dims}")


def make_fold_plan(cluster_counts: Sequence[int], K: int, seed: int) -> FoldPlan:
    """
    Randomly partition each dimension's labels into K groups.

    Each dimension gets its own stream derived from (seed, dimension), is
    shuffled, and is sliced contiguously so that the first C_i mod K groups
    hold one extra label.

    Args:
        cluster_counts: C_i per dimension
        K: Groups per dimension, at least 2
        seed: Plan seed

    Returns:
        FoldPlan

    Raises:
        InfeasiblePartitionError: K < 2 or some C_i < K
    """
    counts = tuple(int(c) for c in cluster_counts)
    if K < 2:
        raise InfeasiblePartitionError(f"K must be at least 2, got {K}")
    short = [i + 1 for i, C in enumerate(counts) if C < K]
    if short:
        raise InfeasiblePartitionError(
            f"dimension(s) {short} have fewer clusters than K={K}: counts={list(counts)}"
        )

    groups = []
    for dim, C in enumerate(counts):
        order = child_rng(seed, dim).permutation(C) + 1
        groups.append(tuple(tuple(sorted(int(c) for c in part)) for part in np.array_split(order, K)))

    plan = FoldPlan(K=int(K), seed=int(seed), cluster_counts=counts, groups=tuple(groups))
    logger.debug(
        f"Fold plan K={K} seed={seed}: group sizes "
        f"{[[len(g) for g in dim_groups] for dim_groups in plan.groups]}"
    )
    return plan


def estimation_cells(plan: FoldPlan, fold: Fold) -> Set[Cell]:
    """Cells of I_k: the product of the fold's group in every dimension."""
    plan._check_fold(fold)
    return set(itertools.product(*(plan.groups[i][k] for i, k in enumerate(fold))))


def training_cells(plan: FoldPlan, fold: Fold) -> Set[Cell]:
    """Cells of I_k^c: the product of the per-dimension complements of the fold's groups."""
    plan._check_fold(fold)
    complements: List[List[int]] = []
    for i, k in enumerate(fold):
        taken = set(plan.groups[i][k])
        complements.append([c for c in range(1, plan.cluster_counts[i] + 1) if c not in taken])
    return set(itertools.product(*complements))


def fold_assignment(plan: FoldPlan, cluster_index: np.ndarray) -> np.ndarray:
    """
    Group position of every observation in every dimension.

    Args:
        plan: Fold plan
        cluster_index: (n, l) array of 1-based labels

    Returns:
        (n, l) integer array
    """
    index = np.asarray(cluster_index, dtype=np.int64)
    return np.column_stack([plan.group_lookup(i)[index[:, i] - 1] for i in range(plan.n_dims)])


def fold_masks(assignment: np.ndarray, fold: Fold) -> Tuple[np.ndarray, np.ndarray]:
    """
    Observation masks for the estimation cells and the training complement of a fold.

    Args:
        assignment: Output of fold_assignment
        fold: Fold id

    Returns:
        (estimation mask, training mask)
    """
    target = np.asarray(fold, dtype=np.int64)
    estimation = np.all(assignment == target, axis=1)
    training = np.all(assignment != target, axis=1)
    return estimation, training


def split_view(dataset: MultiwayDataset, robustness: str) -> MultiwayDataset:
    """
    One-dimensional view of the dataset for a matched split.

    Args:
        dataset: Multiway dataset
        robustness: "zero" makes every observation its own cluster, "one:<i>"
            keeps only dimension i's labels, "multi" returns the dataset itself

    Returns:
        MultiwayDataset with the same rows and a single index column
    """
    kind, dim = robustness_mode(robustness)
    if kind == "multi":
        return dataset
    if kind == "zero":
        index = np.arange(1, dataset.n_obs + 1)[:, None]
        counts = (dataset.n_obs,)
        labels = None
    else:
        if dim >= dataset.n_dims:
            raise InputError(
                f"one-way dimension {dim + 1} does not exist in {dataset.n_dims}-way data", module="crossfit"
            )
        index = dataset.cluster_index[:, [dim]]
        counts = (dataset.cluster_counts[dim],)
        labels = (dataset.labels[dim],)
    return MultiwayDataset(
        cluster_index=index, cluster_counts=counts,
        y=dataset.y, d=dataset.d, z=dataset.z, X=dataset.X, labels=labels,
    )
