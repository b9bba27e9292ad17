"""
Partially linear IV score

    psi(w; theta, eta) = (y - g1(x) - theta (d - g2(x))) (z - m(x))

so psi_a = -(d - g2(x))(z - m(x)) and psi_b = (y - g1(x))(z - m(x)).
The nuisance eta = (g1, g2, m) are penalized regressions of Y, D and Z
on X fitted on the training complement of each fold.
"""
import dataclasses
import logging
from dataclasses import dataclass
from typing import Dict, List, Optional, Tuple

import numpy as np

from mwdml.config.schema import PenaltyConfig
from mwdml.crossfit.folds import FoldPlan, fold_assignment, fold_masks
from mwdml.data.dataset import MultiwayDataset, Observation
from mwdml.errors import FoldInfeasibleError, InputError
from mwdml.models.cv import fit_penalized
from mwdml.models.elastic_net import LinearFit, predict, zero_fit
from mwdml.score.base import LinearScore, ScoreComponents
from mwdml.utils.seeding import child_seed

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class PLIVNuisance:
    """Regressions of Y (g1), D (g2) and Z (m) on X for one fold"""
    g1_fit: LinearFit
    g2_fit: LinearFit
    m_fit: LinearFit
    fold: Tuple[int, ...] = ()

    def __post_init__(self):
        widths = {self.g1_fit.n_features, self.g2_fit.n_features, self.m_fit.n_features}
        if len(widths) != 1:
            raise InputError(f"nuisance fits disagree on covariate dimension: {sorted(widths)}", module="score")

    @property
    def fits(self) -> Dict[str, LinearFit]:
        return {"g1": self.g1_fit, "g2": self.g2_fit, "m": self.m_fit}

    @property
    def converged(self) -> bool:
        return all(fit.converged for fit in self.fits.values())


def fit_nuisance_pliv(
    dataset: MultiwayDataset,
    plan: FoldPlan,
    fold: Tuple[int, ...],
    penalty: PenaltyConfig,
    assignment: Optional[np.ndarray] = None,
) -> PLIVNuisance:
    """
    Fit g1, g2 and m on the pooled observations of the fold's training complement.

    Cross validation, when configured, is rerun for every fold and equation.

    Args:
        dataset: Multiway dataset
        plan: Fold plan
        fold: Fold id
        penalty: Learner settings
        assignment: Precomputed fold_assignment(plan, dataset.cluster_index)

    Returns:
        PLIVNuisance

    Raises:
        FoldInfeasibleError: no observation lies in the training complement
    """
    fold = tuple(int(k) for k in fold)
    if assignment is None:
        assignment = fold_assignment(plan, dataset.cluster_index)
    _, train = fold_masks(assignment, fold)
    if not train.any():
        raise FoldInfeasibleError(fold, f"training complement is empty (plan seed {plan.seed})")

    if penalty.learner == "zero":
        p = dataset.n_covariates
        return PLIVNuisance(zero_fit(p), zero_fit(p), zero_fit(p), fold=fold)

    X = dataset.X[train]
    fits = []
    for eq, target in enumerate((dataset.y, dataset.d, dataset.z)):
        cv_seed = child_seed(penalty.cv.seed, eq)
        fits.append(fit_penalized(X, target[train], penalty, cv_seed=cv_seed))
    nuisance = PLIVNuisance(*fits, fold=fold)
    logger.debug(
        f"fold {fold}: n_train={int(train.sum())}, lambdas="
        f"{[round(f.lambda_, 5) for f in fits]}, sweeps={[f.iterations for f in fits]}"
    )
    return nuisance


def pliv_components(y, d, z, X, nuisance: PLIVNuisance) -> Tuple[np.ndarray, np.ndarray]:
    """Vectorized psi_a and psi_b, each of shape (m,)."""
    instrument_residual = np.asarray(z, dtype=float) - predict(nuisance.m_fit, X)
    psi_a = -(np.asarray(d, dtype=float) - predict(nuisance.g2_fit, X)) * instrument_residual
    psi_b = (np.asarray(y, dtype=float) - predict(nuisance.g1_fit, X)) * instrument_residual
    return psi_a, psi_b


def score_components(obs: Observation, nuisance: PLIVNuisance) -> ScoreComponents:
    """psi_a and psi_b of a single observation."""
    psi_a, psi_b = pliv_components([obs.y], [obs.d], [obs.z], np.atleast_2d(obs.x), nuisance)
    return ScoreComponents(psi_a=psi_a.reshape(1, 1), psi_b=psi_b.reshape(1))


def evaluate_score(obs: Observation, theta: float, nuisance: PLIVNuisance) -> float:
    """psi(w; theta, eta) evaluated directly from its definition."""
    x = np.atleast_2d(obs.x)
    g1 = predict(nuisance.g1_fit, x)[0]
    g2 = predict(nuisance.g2_fit, x)[0]
    m = predict(nuisance.m_fit, x)[0]
    return (obs.y - g1 - theta * (obs.d - g2)) * (obs.z - m)


class PartiallyLinearIVScore(LinearScore):
    d_theta = 1

    def fit_nuisance(self, dataset, plan, fold, penalty, assignment=None) -> PLIVNuisance:
        return fit_nuisance_pliv(dataset, plan, fold, penalty, assignment)

    def components(self, dataset, rows, nuisance):
        psi_a, psi_b = pliv_components(
            dataset.y[rows], dataset.d[rows], dataset.z[rows], dataset.X[rows], nuisance
        )
        return psi_a.reshape(-1, 1, 1), psi_b.reshape(-1, 1)

    def diagnostics(self, nuisance: PLIVNuisance):
        return {
            name: {"converged": fit.converged, "lambda": fit.lambda_, "iterations": fit.iterations}
            for name, fit in nuisance.fits.items()
        }

    def warnings(self, nuisance: PLIVNuisance) -> List[str]:
        return [
            f"fold {nuisance.fold} {name}: {message}"
            for name, fit in nuisance.fits.items()
            for message in fit.warnings
        ]


class OraclePLIVScore(PartiallyLinearIVScore):
    """PLIV score with known nuisance functions plugged into every fold."""

    def __init__(self, nuisance: PLIVNuisance):
        self.nuisance = nuisance

    def fit_nuisance(self, dataset, plan, fold, penalty, assignment=None) -> PLIVNuisance:
        return dataclasses.replace(self.nuisance, fold=tuple(int(k) for k in fold))
