"""
Elastic net by cyclic coordinate descent

Minimizes
    (1/2n) sum_i (y_i - b0 - x_i'b)^2 + lambda * (alpha * |b|_1 + (1 - alpha) * |b|_2^2 / 2)
with an unpenalized intercept. alpha = 1 is the lasso, alpha = 0 is ridge.

The solver works on centred (and optionally standardized) covariates
through the Gram matrix G = X'X/n, so one coordinate update costs O(p).
Full sweeps alternate with sweeps over the active set; a fit is only
reported as converged after a full sweep moves no coefficient by more
than tol and the KKT residual is within 10 * tol.
"""
import logging
import warnings
from dataclasses import dataclass, field
from typing import List, Optional, Tuple

import numpy as np
from sklearn.preprocessing import StandardScaler

from mwdml.config.schema import PenaltyConfig
from mwdml.errors import ConvergenceWarning, InputError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class LinearFit:
    """
    Fitted penalized linear regression, coefficients on the original scale.

    Attributes:
        intercept: b0
        coefficients: b, length p
        alpha: Elastic-net mixing used
        lambda_: Penalty level used
        iterations: Coordinate-descent sweeps performed
        converged: Whether the stopping rule was met before max_iter
        means: Column means used for centring
        scales: Column scales used for standardization (ones when off)
        kkt: Final KKT residual in solver coordinates
        objective_path: Penalized objective after every sweep, when tracked
        warnings: Non-fatal problems met while fitting
    """
    intercept: float
    coefficients: np.ndarray
    alpha: float
    lambda_: float
    iterations: int = 0
    converged: bool = True
    means: Optional[np.ndarray] = None
    scales: Optional[np.ndarray] = None
    kkt: float = 0.0
    objective_path: Optional[List[float]] = None
    warnings: Tuple[str, ...] = field(default_factory=tuple)

    @property
    def n_features(self) -> int:
        return int(self.coefficients.shape[0])

    @property
    def n_active(self) -> int:
        return int(np.count_nonzero(self.coefficients))


def soft_threshold(x: float, t: float) -> float:
    if x > t:
        return x - t
    if x < -t:
        return x + t
    return 0.0


def _kkt(G: np.ndarray, c: np.ndarray, b: np.ndarray, l1: float, l2: float) -> float:
    grad = G @ b - c
    active = b != 0
    residual = np.where(
        active,
        np.abs(grad + l2 * b + l1 * np.sign(b)),
        np.maximum(np.abs(grad) - l1, 0.0),
    )
    return float(residual.max()) if residual.size else 0.0


def _objective(G: np.ndarray, c: np.ndarray, yy: float, b: np.ndarray, l1: float, l2: float) -> float:
    return float(0.5 * (yy - 2.0 * c @ b + b @ (G @ b)) + l1 * np.abs(b).sum() + 0.5 * l2 * b @ b)


class GramProblem:
    """Centred/standardized least-squares data in Gram form, reusable along a lambda path."""

    def __init__(self, X: np.ndarray, y: np.ndarray, standardize: bool):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y, dtype=float).reshape(-1)
        if X.ndim != 2:
            raise InputError(f"X must be 2-dimensional, got shape {X.shape}", module="nuisance")
        n, p = X.shape
        if n == 0:
            raise InputError("cannot fit on zero observations", module="nuisance")
        if p == 0:
            raise InputError("X has no columns", module="nuisance")
        if y.shape[0] != n:
            raise InputError(f"X has {n} rows but y has {y.shape[0]}", module="nuisance")

        self.warnings: List[str] = []
        scaler = StandardScaler(with_mean=True, with_std=standardize).fit(X)
        self.means = scaler.mean_.copy()
        if standardize:
            self.scales = scaler.scale_.copy()
            constant = np.flatnonzero(scaler.var_ == 0)
            if constant.size:
                message = f"constant covariate column(s) {constant.tolist()[:10]}: scale clamped to 1"
                self.warnings.append(message)
                logger.warning(message)
                warnings.warn(message, ConvergenceWarning, stacklevel=3)
        else:
            self.scales = np.ones(p)

        Xs = (X - self.means) / self.scales
        self.n = n
        self.y_mean = float(y.mean())
        yc = y - self.y_mean
        self.G = np.ascontiguousarray(Xs.T @ Xs / n)
        self.c = Xs.T @ yc / n
        self.yy = float(yc @ yc / n)

    @property
    def lambda_max(self) -> float:
        """Smallest lambda at which the lasso solution is all zero."""
        return float(np.abs(self.c).max())

    def solve(
        self,
        lam: float,
        alpha: float,
        max_iter: int,
        tol: float,
        warm: Optional[np.ndarray] = None,
        track_objective: bool = False,
    ):
        """Coordinate descent in solver coordinates; returns (b, sweeps, converged, kkt, path)."""
        G, c = self.G, self.c
        p = c.shape[0]
        l1 = lam * alpha
        l2 = lam * (1.0 - alpha)
        diag = np.diag(G).copy()
        denom = diag + l2
        b = np.zeros(p) if warm is None else np.array(warm, dtype=float)
        all_idx = np.arange(p)
        path = [] if track_objective else None
        if track_objective:
            path.append(_objective(G, c, self.yy, b, l1, l2))

        sweeps = 0
        converged = False
        full = True
        residual = np.inf
        while sweeps < max_iter:
            if full:
                q = G @ b  # refresh to stop drift
                idx = all_idx
            else:
                idx = np.flatnonzero(b)
            max_change = 0.0
            for j in idx:
                if denom[j] <= 0.0:
                    continue
                bj = b[j]
                rho = c[j] - q[j] + diag[j] * bj
                new = soft_threshold(rho, l1) / denom[j]
                if new != bj:
                    delta = new - bj
                    q += delta * G[j]
                    b[j] = new
                    if abs(delta) > max_change:
                        max_change = abs(delta)
            sweeps += 1
            if track_objective:
                path.append(_objective(G, c, self.yy, b, l1, l2))

            if max_change < tol:
                if full:
                    residual = _kkt(G, c, b, l1, l2)
                    if residual <= 10.0 * tol:
                        converged = True
                        break
                else:
                    full = True
            elif full:
                full = False

        if not converged:
            residual = _kkt(G, c, b, l1, l2)
        return b, sweeps, converged, residual, path

    def to_fit(self, b, lam, alpha, sweeps, converged, residual, path, extra_warnings=()) -> LinearFit:
        coefficients = b / self.scales
        intercept = self.y_mean - float(self.means @ coefficients)
        return LinearFit(
            intercept=intercept,
            coefficients=coefficients,
            alpha=float(alpha),
            lambda_=float(lam),
            iterations=int(sweeps),
            converged=bool(converged),
            means=self.means,
            scales=self.scales,
            kkt=float(residual),
            objective_path=path,
            warnings=tuple(self.warnings) + tuple(extra_warnings),
        )


def _nonconvergence(lam: float, alpha: float, sweeps: int, residual: float) -> str:
    message = (
        f"coordinate descent did not converge in {sweeps} sweeps "
        f"(lambda={lam:.3g}, alpha={alpha:g}, kkt={residual:.2e})"
    )
    logger.warning(message)
    warnings.warn(message, ConvergenceWarning, stacklevel=3)
    return message


def fit_elastic_net(X, y, cfg: PenaltyConfig, track_objective: bool = False) -> LinearFit:
    """
    Fit one penalized regression at the fixed lambda in cfg.

    Args:
        X: (n, p) covariates
        y: (n,) response
        cfg: Penalty configuration; cfg.lambda_ must be set
        track_objective: Record the penalized objective after every sweep

    Returns:
        LinearFit (converged=False with a warning if max_iter was hit)
    """
    if cfg.lambda_ is None:
        raise InputError("lambda must be resolved before fitting (use fit_penalized for CV)", module="nuisance")
    problem = GramProblem(X, y, cfg.standardize)
    return solve_to_fit(problem, cfg.lambda_, cfg.alpha, cfg.max_iter, cfg.tol, track_objective=track_objective)


def solve_to_fit(problem, lam, alpha, max_iter, tol, warm=None, track_objective=False) -> LinearFit:
    b, sweeps, converged, residual, path = problem.solve(lam, alpha, max_iter, tol, warm, track_objective)
    extra = () if converged else (_nonconvergence(lam, alpha, sweeps, residual),)
    return problem.to_fit(b, lam, alpha, sweeps, converged, residual, path, extra)


def predict(fit: LinearFit, X) -> np.ndarray:
    """
    Predictions intercept + X b.

    Args:
        fit: Fitted regression
        X: (m, p) covariates

    Returns:
        (m,) predictions
    """
    X = np.asarray(X, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
    if X.shape[1] != fit.n_features:
        raise InputError(f"X has {X.shape[1]} columns, fit expects {fit.n_features}", module="nuisance")
    return fit.intercept + X @ fit.coefficients


def zero_fit(p: int) -> LinearFit:
    """A fit that predicts 0 everywhere."""
    return LinearFit(intercept=0.0, coefficients=np.zeros(p), alpha=1.0, lambda_=0.0)


def _solver_coordinates(fit: LinearFit, X, y):
    X = np.asarray(X, dtype=float)
    y = np.asarray(y, dtype=float).reshape(-1)
    means = fit.means if fit.means is not None else X.mean(axis=0)
    scales = fit.scales if fit.scales is not None else np.ones(X.shape[1])
    Xs = (X - means) / scales
    yc = y - y.mean()
    n = X.shape[0]
    return Xs.T @ Xs / n, Xs.T @ yc / n, float(yc @ yc / n), fit.coefficients * scales


def kkt_residual(fit: LinearFit, X, y) -> float:
    """
    Largest KKT violation of fit on (X, y), in the solver's coordinates.

    For active coordinates |g_j + lambda(1-alpha) b_j + lambda alpha sign(b_j)|,
    for inactive ones max(|g_j| - lambda alpha, 0), with g_j = -x_j'r/n.
    """
    G, c, _, b = _solver_coordinates(fit, X, y)
    return _kkt(G, c, b, fit.lambda_ * fit.alpha, fit.lambda_ * (1.0 - fit.alpha))


def objective(fit: LinearFit, X, y) -> float:
    """Penalized objective of fit on (X, y) in solver coordinates."""
    G, c, yy, b = _solver_coordinates(fit, X, y)
    return _objective(G, c, yy, b, fit.lambda_ * fit.alpha, fit.lambda_ * (1.0 - fit.alpha))
