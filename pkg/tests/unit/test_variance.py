"""
Tests for the multiway meat, reference meats, sandwich and interval
"""
import itertools

import numpy as np
import pytest
from scipy.optimize import bisect

from mwdml.crossfit.folds import fold_assignment, fold_masks, make_fold_plan
from mwdml.errors import DegenerateIdentificationError, InputError, NonPositiveVarianceError
from mwdml.estimation.estimator import moment, solve_theta
from mwdml.estimation.fold_scores import FoldScores
from mwdml.estimation.variance import (
    confidence_interval,
    exact_sum,
    multiway_meat,
    reference_meat,
    variance,
)


def _single_fold_two_by_two():
    codes = np.array([[0, 0], [0, 1], [1, 0], [1, 1]])
    return [
        FoldScores(
            fold=(0, 0),
            codes=codes,
            psi_a=-np.ones((4, 1, 1)),
            psi_b=np.array([[1.0], [2.0], [3.0], [4.0]]),
            group_sizes=(2, 2),
        )
    ]


def test_golden_values():
    scores = _single_fold_two_by_two()
    counts = (2, 2)
    assert multiway_meat(scores, 0.0, counts)[0, 0] == pytest.approx(13.75)
    assert reference_meat(scores, 0.0, counts, "one", 0)[0, 0] == pytest.approx(7.25)
    assert reference_meat(scores, 0.0, counts, "one", 1)[0, 0] == pytest.approx(6.5)
    assert reference_meat(scores, 0.0, counts, "zero")[0, 0] == pytest.approx(3.75)


def _random_fold_scores(rng, counts, K=2, d=1):
    """Fold scores from a random plan and random occupancy, with scalar-or-vector scores."""
    plan = make_fold_plan(counts, K, seed=int(rng.integers(1_000_000)))
    cells = [np.array(c) + 1 for c in itertools.product(*(range(C) for C in counts))]
    index = np.array([c for c in cells for _ in range(int(rng.integers(0, 3)))] or [cells[0]])
    assignment = fold_assignment(plan, index)
    result = []
    for fold in plan.folds():
        rows = np.flatnonzero(fold_masks(assignment, fold)[0])
        psi_a = -np.abs(rng.standard_normal((rows.size, d, d))) - np.eye(d) * 0.5
        result.append(
            FoldScores(
                fold=fold,
                codes=index[rows] - 1,
                psi_a=psi_a,
                psi_b=rng.standard_normal((rows.size, d)),
                group_sizes=plan.group_sizes(fold),
            )
        )
    return plan, result


def _brute_force_multiway(fold_scores, theta):
    total = 0.0
    for fs in fold_scores:
        psi = fs.psi(theta)[:, 0]
        acc = 0.0
        for a in range(fs.n_obs):
            for b in range(fs.n_obs):
                for dim in range(fs.codes.shape[1]):
                    if fs.codes[a, dim] == fs.codes[b, dim]:
                        acc += psi[a] * psi[b]
        total += min(fs.group_sizes) / fs.n_cells ** 2 * acc
    return total / len(fold_scores)


def test_multiway_meat_matches_nested_loops():
    rng = np.random.default_rng(0)
    for _ in range(100):
        n_dims = int(rng.integers(1, 4))
        counts = tuple(int(c) for c in rng.integers(2, 5, size=n_dims))
        plan, scores = _random_fold_scores(rng, counts)
        theta = float(rng.normal())
        fast = multiway_meat(scores, theta, plan.cluster_counts)[0, 0]
        assert fast == pytest.approx(_brute_force_multiway(scores, theta), abs=1e-12)


def test_theta_is_the_root_of_the_moment():
    rng = np.random.default_rng(1)
    for _ in range(100):
        counts = tuple(int(c) for c in rng.integers(2, 6, size=2))
        _, scores = _random_fold_scores(rng, counts)
        if sum(fs.n_obs for fs in scores) == 0:
            continue
        theta, _ = solve_theta(scores)

        assert abs(moment(scores, theta)[0]) <= 1e-12
        f = lambda t: moment(scores, t)[0]  # noqa: E731
        lo, hi = theta[0] - 100.0, theta[0] + 100.0
        assert bisect(f, lo, hi, xtol=1e-13, maxiter=500) == pytest.approx(theta[0], abs=1e-10)


def test_meats_are_positive_semidefinite():
    rng = np.random.default_rng(2)
    for _ in range(30):
        plan, scores = _random_fold_scores(rng, (4, 3), d=2)
        theta = rng.normal(size=2)
        for gamma in (
            multiway_meat(scores, theta, plan.cluster_counts),
            reference_meat(scores, theta, plan.cluster_counts, "one", 1),
            reference_meat(scores, theta, plan.cluster_counts, "zero"),
        ):
            np.testing.assert_allclose(gamma, gamma.T)
            assert np.linalg.eigvalsh(gamma).min() >= -1e-12


def test_one_way_equals_zero_way_with_one_observation_per_cluster():
    rng = np.random.default_rng(3)
    codes = np.arange(6)[:, None]
    scores = [
        FoldScores(fold=(0,), codes=codes[:3], psi_a=-np.ones((3, 1, 1)),
                   psi_b=rng.standard_normal((3, 1)), group_sizes=(3,)),
        FoldScores(fold=(1,), codes=codes[3:], psi_a=-np.ones((3, 1, 1)),
                   psi_b=rng.standard_normal((3, 1)), group_sizes=(3,)),
    ]
    one = reference_meat(scores, 0.3, (6,), "one", 0)
    zero = reference_meat(scores, 0.3, (6,), "zero")
    multi = multiway_meat(scores, 0.3, (6,))
    np.testing.assert_allclose(one, zero)
    np.testing.assert_allclose(multi, zero)


def test_balanced_multiway_is_sum_of_one_way():
    rng = np.random.default_rng(4)
    plan, scores = _random_fold_scores(rng, (4, 4))
    multi = multiway_meat(scores, 0.1, plan.cluster_counts)
    split = reference_meat(scores, 0.1, plan.cluster_counts, "one", 0) + reference_meat(
        scores, 0.1, plan.cluster_counts, "one", 1
    )
    np.testing.assert_allclose(multi, split, rtol=1e-12)


def test_exact_sum_ignores_order():
    terms = np.array([1e16, 1.0, -1e16, 3.0])
    assert exact_sum(terms) == 4.0
    assert exact_sum(terms[::-1]) == 4.0


def test_bad_reference_mode():
    scores = _single_fold_two_by_two()
    with pytest.raises(InputError):
        reference_meat(scores, 0.0, (2, 2), "one", 2)
    with pytest.raises(InputError):
        reference_meat(scores, 0.0, (2, 2), "two")


def test_sandwich():
    sigma2 = variance(np.array([[2.0]]), np.array([[8.0]]))
    assert sigma2[0, 0] == pytest.approx(2.0)

    with pytest.raises(DegenerateIdentificationError) as info:
        variance(np.array([[1e-12]]), np.array([[1.0]]))
    assert info.value.singular_values == [1e-12]


def test_interval():
    lo, hi = confidence_interval(1.0, 4.0, 16, 0.05)
    assert (lo + hi) / 2 == pytest.approx(1.0)
    assert hi - lo == pytest.approx(2 * 1.959963984540054 * 0.5)

    lo, hi = confidence_interval([1.0, 2.0], np.diag([4.0, 9.0]), 9, 0.05, r=[0.0, 1.0])
    assert (lo + hi) / 2 == pytest.approx(2.0)
    assert hi - lo == pytest.approx(2 * 1.959963984540054)

    lo, hi = confidence_interval(1.0, 4.0, 16, 1 - 1e-12)
    assert hi - lo < 1e-9


def test_interval_errors():
    with pytest.raises(NonPositiveVarianceError):
        confidence_interval(1.0, 0.0, 10, 0.05)
    with pytest.raises(InputError):
        confidence_interval(1.0, 1.0, 10, 1.5)


def test_sandwich_examples():
    assert variance(np.array([[-0.5]]), np.array([[13.75]]))[0, 0] == pytest.approx(55.0)
    gamma = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_allclose(variance(np.eye(2), gamma), gamma)


def test_zero_scores_give_zero_meat():
    scores = _single_fold_two_by_two()
    zero = [FoldScores(fold=s.fold, codes=s.codes, psi_a=s.psi_a, psi_b=np.zeros_like(s.psi_b),
                       group_sizes=s.group_sizes) for s in scores]
    assert multiway_meat(zero, 0.0, (2, 2))[0, 0] == 0.0


def test_common_score_scaling_leaves_estimate_unchanged():
    rng = np.random.default_rng(5)
    plan, scores = _random_fold_scores(rng, (4, 5))
    scaled = [FoldScores(fold=s.fold, codes=s.codes, psi_a=-3.0 * s.psi_a, psi_b=-3.0 * s.psi_b,
                         group_sizes=s.group_sizes) for s in scores]

    theta, J = solve_theta(scores)
    theta_s, J_s = solve_theta(scaled)
    sigma2 = variance(J, multiway_meat(scores, theta, plan.cluster_counts))
    sigma2_s = variance(J_s, multiway_meat(scaled, theta_s, plan.cluster_counts))
    np.testing.assert_allclose(theta_s, theta, rtol=1e-12)
    np.testing.assert_allclose(sigma2_s, sigma2, rtol=1e-10)


def test_interval_example():
    lo, hi = confidence_interval(1.0, 4.0, 100, 0.05)
    assert lo == pytest.approx(0.60801, abs=1e-5)
    assert hi == pytest.approx(1.39199, abs=1e-5)

    lo2, hi2 = confidence_interval(1.0, 4.0, 200, 0.05)
    assert (hi - lo) / (hi2 - lo2) == pytest.approx(np.sqrt(2.0))


def test_iv_ratio_single_fold():
    # zero nuisance: psi_a = -d z, psi_b = y z
    fold = FoldScores(fold=(0,), codes=np.array([[0], [1]]), psi_a=-np.array([[[1.0]], [[2.0]]]),
                      psi_b=np.array([[2.0], [4.0]]), group_sizes=(2,))
    theta, _ = solve_theta([fold])
    assert theta[0] == pytest.approx(2.0)
