"""
Two-way clustered partially linear IV design

Every primitive (X, eps, ups, V) of cell (i, j) mixes three independent draws,

    (1 - w1 - w2) a_ij + w1 a_i + w2 a_j,

an idiosyncratic term, a row effect and a column effect. The weights scale
the draws themselves, not their variances. Then

    Z = X'xi0 + V,   D = Z pi10 + X'pi20 + ups,   Y = D theta0 + X'zeta0 + eps,

with zeta0 = pi20 = xi0 = (0.5, 0.5^2, ..., 0.5^p). One observation per cell.
"""
import logging
from dataclasses import dataclass
from functools import lru_cache
from typing import Tuple

import numpy as np
from scipy.linalg import LinAlgError, cholesky, toeplitz

from mwdml.config.schema import DGPParams
from mwdml.data.dataset import ColumnMapping, MultiwayDataset
from mwdml.errors import NumericalError
from mwdml.models.elastic_net import LinearFit
from mwdml.score.pliv import PLIVNuisance
from mwdml.utils.seeding import child_rng

logger = logging.getLogger(__name__)


@lru_cache(maxsize=32)
def toeplitz_factor(p: int, s: float) -> np.ndarray:
    """
    Lower Cholesky factor of the Toeplitz matrix [s^|r-c|].

    Raises:
        NumericalError: the matrix is not positive definite
    """
    cov = toeplitz(s ** np.arange(p))
    try:
        factor = cholesky(cov, lower=True)
    except LinAlgError as e:
        raise NumericalError(f"Toeplitz covariance with s={s} is not positive definite", module="simulate") from e
    factor.setflags(write=False)
    return factor


def bivariate_factor(rho: float) -> np.ndarray:
    cov = np.array([[1.0, rho], [rho, 1.0]])
    try:
        return cholesky(cov, lower=True)
    except LinAlgError as e:
        raise NumericalError(f"correlation {rho} does not give a positive definite covariance", module="simulate") from e


def true_coefficients(dim_x: int) -> np.ndarray:
    """xi0 = zeta0 = pi20 = (0.5, 0.5^2, ..., 0.5^dim_x)."""
    return 0.5 ** np.arange(1, dim_x + 1)


@dataclass(frozen=True)
class Component:
    """Idiosyncratic (N, M, q), row (N, q) and column (M, q) draws of one primitive"""
    cell: np.ndarray
    row: np.ndarray
    col: np.ndarray

    def combine(self, weights: Tuple[float, float]) -> np.ndarray:
        w1, w2 = weights
        return (1.0 - w1 - w2) * self.cell + w1 * self.row[:, None, :] + w2 * self.col[None, :, :]

    def permute(self, rows=None, cols=None) -> "Component":
        """Apply label permutations; rows[i] is the old row shown at new position i."""
        cell, row, col = self.cell, self.row, self.col
        if rows is not None:
            cell, row = cell[rows], row[rows]
        if cols is not None:
            cell, col = cell[:, cols], col[cols]
        return Component(cell=cell, row=row, col=col)


@dataclass(frozen=True)
class DGPComponents:
    x: Component
    eps_ups: Component
    v: Component

    def permute(self, rows=None, cols=None) -> "DGPComponents":
        return DGPComponents(
            x=self.x.permute(rows, cols),
            eps_ups=self.eps_ups.permute(rows, cols),
            v=self.v.permute(rows, cols),
        )


def _draw(rng: np.random.Generator, shape: Tuple[int, ...], factor: np.ndarray) -> np.ndarray:
    q = factor.shape[0]
    return rng.standard_normal(shape + (q,)) @ factor.T


def draw_components(params: DGPParams, rng: np.random.Generator) -> DGPComponents:
    """Draw the idiosyncratic, row and column terms of every primitive."""
    N, M = params.N, params.M
    fx = toeplitz_factor(params.dim_x, params.s_x)
    fe = bivariate_factor(params.s_eps_ups)
    one = np.ones((1, 1))
    parts = {}
    for name, factor in (("x", fx), ("eps_ups", fe), ("v", one)):
        parts[name] = Component(
            cell=_draw(rng, (N, M), factor),
            row=_draw(rng, (N,), factor),
            col=_draw(rng, (M,), factor),
        )
    return DGPComponents(**parts)


def assemble(params: DGPParams, components: DGPComponents) -> MultiwayDataset:
    """
    Build the dataset from drawn components.

    Cells are laid out row-major: observation i * M + j has labels (i + 1, j + 1).
    """
    N, M, p = params.N, params.M, params.dim_x
    w = params.weights
    X = components.x.combine(w.x)
    eps = components.eps_ups.combine(w.eps)[..., 0]
    ups = components.eps_ups.combine(w.ups)[..., 1]
    V = components.v.combine(w.v)[..., 0]

    coef = true_coefficients(p)
    Xc = X @ coef
    Z = Xc + V
    D = Z * params.pi10 + Xc + ups
    Y = D * params.theta0 + Xc + eps

    rows, cols = np.meshgrid(np.arange(1, N + 1), np.arange(1, M + 1), indexing="ij")
    return MultiwayDataset(
        cluster_index=np.column_stack([rows.reshape(-1), cols.reshape(-1)]),
        cluster_counts=(N, M),
        y=Y.reshape(-1),
        d=D.reshape(-1),
        z=Z.reshape(-1),
        X=X.reshape(N * M, p),
        schema=ColumnMapping.default(2, p),
    )


def generate_dgp(params: DGPParams) -> MultiwayDataset:
    """
    Draw one two-way clustered sample.

    Args:
        params: Design parameters; params.seed fixes the draw

    Returns:
        MultiwayDataset with N * M observations, one per cell
    """
    rng = child_rng(params.seed)
    dataset = assemble(params, draw_components(params, rng))
    logger.debug(f"Generated N={params.N} M={params.M} dim_x={params.dim_x} seed={params.seed}")
    return dataset


def oracle_nuisance(params: DGPParams) -> PLIVNuisance:
    """
    True nuisance functions of the design, as linear fits.

    m(x) = x'xi0, g2(x) = x'(xi0 pi10 + pi20), g1(x) = x'(theta0 (xi0 pi10 + pi20) + zeta0).
    """
    coef = true_coefficients(params.dim_x)
    g2 = coef * params.pi10 + coef
    g1 = params.theta0 * g2 + coef

    def linear(b: np.ndarray) -> LinearFit:
        return LinearFit(intercept=0.0, coefficients=b, alpha=1.0, lambda_=0.0)

    return PLIVNuisance(g1_fit=linear(g1), g2_fit=linear(g2), m_fit=linear(coef))
