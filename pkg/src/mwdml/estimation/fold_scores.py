"""
Per-fold score components, the common input of the estimator and the variance
"""
import logging
from dataclasses import dataclass
from typing import Dict, List, Mapping, Optional, Tuple

import numpy as np
from joblib import Parallel, delayed

from mwdml.crossfit.folds import FoldPlan, fold_assignment, fold_masks
from mwdml.data.dataset import MultiwayDataset
from mwdml.score.base import LinearScore

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class FoldScores:
    """
    Score components of the observations in one fold's estimation cells.

    Attributes:
        fold: Fold id
        codes: (m, l) zero-based cluster labels of the fold's observations
        psi_a: (m, d, d)
        psi_b: (m, d)
        group_sizes: |I_{k_i}| for each dimension
    """
    fold: Tuple[int, ...]
    codes: np.ndarray
    psi_a: np.ndarray
    psi_b: np.ndarray
    group_sizes: Tuple[int, ...]

    @property
    def n_cells(self) -> int:
        """|I_k|: cells in the fold, empty ones included."""
        return int(np.prod(self.group_sizes))

    @property
    def n_obs(self) -> int:
        return int(self.psi_b.shape[0])

    @property
    def d_theta(self) -> int:
        return int(self.psi_b.shape[1])

    def psi(self, theta) -> np.ndarray:
        """(m, d) scores at theta."""
        theta = np.atleast_1d(np.asarray(theta, dtype=float))
        return np.einsum("mij,j->mi", self.psi_a, theta) + self.psi_b

    def mean_a(self) -> np.ndarray:
        """E_{n,k}[psi_a]: within-fold sum divided by the cell count."""
        return self.psi_a.sum(axis=0) / self.n_cells

    def mean_b(self) -> np.ndarray:
        return self.psi_b.sum(axis=0) / self.n_cells


def fit_nuisances(
    dataset: MultiwayDataset,
    plan: FoldPlan,
    score: LinearScore,
    penalty,
    n_jobs: int = 1,
) -> Dict[Tuple[int, ...], object]:
    """
    Fit the score's nuisance on every fold's training complement.

    Folds run in parallel threads when n_jobs > 1; the result is keyed by fold
    in lexicographic order regardless of scheduling.
    """
    assignment = fold_assignment(plan, dataset.cluster_index)
    folds = list(plan.folds())
    if n_jobs > 1 and len(folds) > 1:
        fitted = Parallel(n_jobs=n_jobs, prefer="threads")(
            delayed(score.fit_nuisance)(dataset, plan, fold, penalty, assignment) for fold in folds
        )
    else:
        fitted = [score.fit_nuisance(dataset, plan, fold, penalty, assignment) for fold in folds]
    return dict(zip(folds, fitted))


def build_fold_scores(
    dataset: MultiwayDataset,
    plan: FoldPlan,
    nuisances: Mapping[Tuple[int, ...], object],
    score: Optional[LinearScore] = None,
) -> List[FoldScores]:
    """
    Evaluate score components fold by fold.

    Args:
        dataset: Multiway dataset
        plan: Fold plan
        nuisances: Fitted nuisance per fold id
        score: Score definition (partially linear IV by default)

    Returns:
        FoldScores for every fold, in lexicographic fold order
    """
    if score is None:
        from mwdml.score.pliv import PartiallyLinearIVScore

        score = PartiallyLinearIVScore()
    assignment = fold_assignment(plan, dataset.cluster_index)
    result = []
    for fold in plan.folds():
        if fold not in nuisances:
            raise KeyError(f"estimator: no nuisance fitted for fold {fold}")
        estimation, _ = fold_masks(assignment, fold)
        rows = np.flatnonzero(estimation)
        psi_a, psi_b = score.components(dataset, rows, nuisances[fold])
        result.append(
            FoldScores(
                fold=fold,
                codes=dataset.codes[rows],
                psi_a=np.asarray(psi_a, dtype=float).reshape(rows.size, score.d_theta, score.d_theta),
                psi_b=np.asarray(psi_b, dtype=float).reshape(rows.size, score.d_theta),
                group_sizes=plan.group_sizes(fold),
            )
        )
    return result
