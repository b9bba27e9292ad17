"""
Penalty selection by K-fold cross validation
"""
import logging
from typing import Optional, Sequence

import numpy as np
from sklearn.model_selection import KFold

from mwdml.config.schema import PenaltyConfig
from mwdml.errors import InputError
from mwdml.models.elastic_net import LinearFit, GramProblem, solve_to_fit

logger = logging.getLogger(__name__)


def lambda_grid(X, y, n_grid: int = 50, ratio: float = 1e-3, standardize: bool = True) -> np.ndarray:
    """
    Geometric grid from lambda_max = max_j |x_j'(y - ybar)|/n down to ratio * lambda_max.

    Args:
        X: (n, p) covariates
        y: (n,) response
        n_grid: Number of grid values
        ratio: Smallest value as a fraction of lambda_max
        standardize: Measure lambda_max on standardized covariates

    Returns:
        Descending array of penalty values
    """
    lam_max = GramProblem(X, y, standardize).lambda_max
    if lam_max == 0.0:
        return np.zeros(1)
    if n_grid == 1:
        return np.array([lam_max])
    return np.geomspace(lam_max, ratio * lam_max, n_grid)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).reshape(-1)
    if grid.size == 0:
        raise InputError("lambda grid is empty", module="nuisance")
    if np.any(grid < 0) or not np.all(np.isfinite(grid)):
        raise InputError(f"lambda grid has negative or non-finite values: {grid[grid < 0][:5]}", module="nuisance")
    return np.sort(grid)[::-1]


def select_lambda_cv(
    X,
    y,
    alpha: float,
    grid: Sequence[float],
    n_cv_folds: int,
    cv_seed: int,
    max_iter: int = 10_000,
    tol: float = 1e-7,
    standardize: bool = True,
) -> float:
    """
    Choose lambda by minimum mean held-out squared error over a seeded row-level K-fold split.

    The grid is walked from the largest value down with warm starts. Ties go
    to the larger lambda.

    Args:
        X: (n, p) covariates
        y: (n,) response
        alpha: Elastic-net mixing
        grid: Candidate penalties
        n_cv_folds: Number of CV folds, 2 <= n_cv_folds <= n
        cv_seed: Seed of the row shuffle

    Returns:
        Selected lambda
    """
    grid = _check_grid(grid)
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    n = X.shape[0]
    if n_cv_folds < 2 or n < n_cv_folds:
        raise InputError(f"need 2 <= n_cv_folds <= n, got n_cv_folds={n_cv_folds}, n={n}", module="nuisance")
    if grid.size == 1:
        return float(grid[0])

    splitter = KFold(n_splits=n_cv_folds, shuffle=True, random_state=int(cv_seed) % 2**32)
    errors = np.zeros((n_cv_folds, grid.size))
    for f, (train, test) in enumerate(splitter.split(X)):
        problem = GramProblem(X[train], y[train], standardize)
        X_test = (X[test] - problem.means) / problem.scales
        warm = None
        for g, lam in enumerate(grid):
            b, *_ = problem.solve(lam, alpha, max_iter, tol, warm)
            warm = b
            fitted = problem.y_mean + X_test @ b
            errors[f, g] = np.mean((y[test] - fitted) ** 2)

    mean_error = errors.mean(axis=0)
    best = int(np.argmin(mean_error))
    logger.debug(f"CV picked lambda={grid[best]:.4g} (index {best} of {grid.size}, mse={mean_error[best]:.4g})")
    return float(grid[best])


def fit_penalized(X, y, cfg: PenaltyConfig, cv_seed: Optional[int] = None) -> LinearFit:
    """
    Fit with a fixed lambda, or pick lambda by CV first and refit on all rows.

    Args:
        X: (n, p) covariates
        y: (n,) response
        cfg: Penalty configuration
        cv_seed: Overrides cfg.cv.seed

    Returns:
        LinearFit at the resolved lambda
    """
    if cfg.is_fixed:
        lam = cfg.lambda_
    else:
        grid = cfg.cv.grid if cfg.cv.grid is not None else lambda_grid(
            X, y, cfg.cv.n_grid, cfg.cv.ratio, cfg.standardize
        )
        n_folds = min(cfg.cv.n_folds, np.asarray(X).shape[0])
        if n_folds < 2:
            lam = float(np.max(grid))
        else:
            lam = select_lambda_cv(
                X, y, cfg.alpha, grid, n_folds,
                cfg.cv.seed if cv_seed is None else cv_seed,
                max_iter=cfg.max_iter, tol=cfg.tol, standardize=cfg.standardize,
            )
    problem = GramProblem(X, y, cfg.standardize)
    return solve_to_fit(problem, lam, cfg.alpha, cfg.max_iter, cfg.tol)
