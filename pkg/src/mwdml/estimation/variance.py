"""
Multiway cluster-robust variance

The meat matrix follows one per-fold template,

    Gamma = (1/K^l) sum_k h_k / |I_k|^2 * sum over same-cluster pairs of psi psi',

where "same-cluster" and the weight h_k depend on the assumed dependence:

    multiway     pairs sharing the label of any dimension i (summed over i),
                 h_k = min_i |I_{k_i}|
    one-way (i)  pairs sharing the dimension-i label, h_k = C_min |I_{k_i}| / C_i
    zero-way     identical observations only, h_k = C_min |I_k| / prod_i C_i

Diagonal pairs are counted once per dimension in the multiway sum.
Standard errors are always sqrt(sigma2 / C_min).
"""
import math
from typing import Optional, Sequence

import numpy as np
from scipy.stats import norm

from mwdml.errors import DegenerateIdentificationError, InputError, NonPositiveVarianceError
from mwdml.estimation.fold_scores import FoldScores

SINGULAR_THRESHOLD = 1e-10


def exact_sum(terms: np.ndarray) -> np.ndarray:
    """Correctly rounded elementwise sum over the first axis, independent of term order."""
    terms = np.asarray(terms, dtype=float)
    if terms.shape[0] == 0:
        return np.zeros(terms.shape[1:])
    flat = terms.reshape(terms.shape[0], -1)
    return np.array([math.fsum(flat[:, e]) for e in range(flat.shape[1])]).reshape(terms.shape[1:])


def _shared_label_sum(codes: np.ndarray, psi: np.ndarray, n_groups: int) -> np.ndarray:
    """sum_c S_c S_c' with S_c the sum of psi over observations labelled c."""
    sums = np.zeros((n_groups, psi.shape[1]))
    np.add.at(sums, codes, psi)
    return exact_sum(sums[:, :, None] * sums[:, None, :])


def _self_sum(psi: np.ndarray) -> np.ndarray:
    return exact_sum(psi[:, :, None] * psi[:, None, :])


def multiway_meat(fold_scores: Sequence[FoldScores], theta, cluster_counts: Sequence[int]) -> np.ndarray:
    """
    Multiway meat Gamma-hat from per-fold scores.

    Args:
        fold_scores: Scores of every fold
        theta: Estimate at which scores are evaluated
        cluster_counts: C_i per dimension

    Returns:
        (d, d) symmetric positive semidefinite matrix
    """
    contributions = []
    for fs in fold_scores:
        psi = fs.psi(theta)
        pairs = sum(
            _shared_label_sum(fs.codes[:, i], psi, cluster_counts[i]) for i in range(len(cluster_counts))
        )
        contributions.append(min(fs.group_sizes) / fs.n_cells ** 2 * pairs)
    return exact_sum(np.array(contributions)) / len(fold_scores)


def reference_meat(
    fold_scores: Sequence[FoldScores],
    theta,
    cluster_counts: Sequence[int],
    mode: str,
    dim: Optional[int] = None,
    c_min: Optional[int] = None,
) -> np.ndarray:
    """
    Zero-way or one-way meat on the same folds.

    Args:
        fold_scores: Scores of every fold
        theta: Estimate at which scores are evaluated
        cluster_counts: C_i per dimension
        mode: "zero" or "one"
        dim: Zero-based clustering dimension for mode "one"
        c_min: C-underbar of the full design when the folds come from a split view

    Returns:
        (d, d) meat matrix
    """
    c_min = min(cluster_counts) if c_min is None else c_min
    total_cells = int(np.prod(cluster_counts))
    if mode == "one":
        if dim is None or not 0 <= dim < len(cluster_counts):
            raise InputError(
                f"invalid one-way dimension {None if dim is None else dim + 1} for {len(cluster_counts)} dimensions",
                module="estimator",
            )
    elif mode != "zero":
        raise InputError(f"unknown reference mode {mode!r}", module="estimator")

    contributions = []
    for fs in fold_scores:
        psi = fs.psi(theta)
        if mode == "zero":
            weight = c_min * fs.n_cells / total_cells
            pairs = _self_sum(psi)
        else:
            weight = c_min * fs.group_sizes[dim] / cluster_counts[dim]
            pairs = _shared_label_sum(fs.codes[:, dim], psi, cluster_counts[dim])
        contributions.append(weight / fs.n_cells ** 2 * pairs)
    return exact_sum(np.array(contributions)) / len(fold_scores)


def check_invertible(J) -> np.ndarray:
    """Return J as a 2-d array, raising if its smallest singular value is below threshold."""
    J = np.atleast_2d(np.asarray(J, dtype=float))
    singular_values = np.linalg.svd(J, compute_uv=False)
    if singular_values.min() <= SINGULAR_THRESHOLD:
        raise DegenerateIdentificationError(singular_values, SINGULAR_THRESHOLD)
    return J


def variance(J, gamma) -> np.ndarray:
    """
    Sandwich sigma2 = J^-1 Gamma (J^-1)'.

    Args:
        J: (d, d) Jacobian
        gamma: (d, d) meat

    Returns:
        (d, d) symmetric matrix
    """
    J_inv = np.linalg.inv(check_invertible(J))
    sigma2 = J_inv @ np.atleast_2d(gamma) @ J_inv.T
    return 0.5 * (sigma2 + sigma2.T)


def confidence_interval(theta, sigma2, c_min: int, a: float, r=None):
    """
    Interval r'theta -/+ z_{1-a/2} sqrt(r' sigma2 r / C_min).

    Args:
        theta: Estimate, scalar or (d,)
        sigma2: Asymptotic variance, scalar or (d, d)
        c_min: Effective sample size C-underbar
        a: Significance level, 0 < a < 1
        r: Linear functional (defaults to the first unit vector)

    Returns:
        (lo, hi)
    """
    if not 0 < a < 1:
        raise InputError(f"significance level a must lie in (0, 1), got {a}", module="estimator")
    if c_min < 1:
        raise InputError(f"C_min must be at least 1, got {c_min}", module="estimator")
    theta = np.atleast_1d(np.asarray(theta, dtype=float))
    sigma2 = np.atleast_2d(np.asarray(sigma2, dtype=float))
    if r is None:
        r = np.zeros(theta.size)
        r[0] = 1.0
    r = np.atleast_1d(np.asarray(r, dtype=float))
    spread = float(r @ sigma2 @ r)
    if not spread > 0:
        raise NonPositiveVarianceError(spread)
    center = float(r @ theta)
    half_width = norm.ppf(1.0 - a / 2.0) * math.sqrt(spread / c_min)
    return center - half_width, center + half_width
