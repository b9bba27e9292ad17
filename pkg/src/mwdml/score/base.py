"""
Linear Neyman-orthogonal scores psi(w; theta, eta) = psi_a(w; eta) theta + psi_b(w; eta)
"""
from abc import ABC, abstractmethod
from dataclasses import dataclass
from typing import Any, Dict, List, Tuple

import numpy as np


@dataclass(frozen=True)
class ScoreComponents:
    """psi_a (d x d) and psi_b (d,) of one observation"""
    psi_a: np.ndarray
    psi_b: np.ndarray

    def evaluate(self, theta) -> np.ndarray:
        """psi_a theta + psi_b"""
        return self.psi_a @ np.atleast_1d(np.asarray(theta, dtype=float)) + self.psi_b


class LinearScore(ABC):
    """
    A linear score with fold-specific nuisance fitting.

    Subclasses fit their nuisance on a fold's training complement and
    return per-observation components for the fold's estimation cells.
    """

    #: dimension of theta
    d_theta: int = 1

    @abstractmethod
    def fit_nuisance(self, dataset, plan, fold, penalty, assignment=None) -> Any:
        """Fit the nuisance on the training complement of fold."""

    @abstractmethod
    def components(self, dataset, rows: np.ndarray, nuisance) -> Tuple[np.ndarray, np.ndarray]:
        """
        Components for the observations in rows.

        Returns:
            psi_a of shape (m, d, d) and psi_b of shape (m, d)
        """

    def diagnostics(self, nuisance) -> Dict[str, Any]:
        """Convergence record of a fitted nuisance, for reports."""
        return {}

    def warnings(self, nuisance) -> List[str]:
        return []
