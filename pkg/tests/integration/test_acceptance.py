"""
Monte Carlo acceptance runs at desk scale

These take minutes to hours; run with MWDML_RUN_SLOW=1.
"""
import os

import pytest

from mwdml.config.schema import DGPParams, DMLConfig, PenaltyConfig
from mwdml.simulation.monte_carlo import monte_carlo

pytestmark = pytest.mark.slow

THREADS = int(os.getenv("MWDML_THREADS", os.cpu_count() or 1))


def _run(N, dim_x, K, learner, n_reps, seed=2024):
    dml = DMLConfig(K=K, penalty=PenaltyConfig(learner=learner))
    return monte_carlo(DGPParams(N=N, M=N, dim_x=dim_x), dml, n_reps, seed, n_jobs=THREADS, progress=False)


@pytest.mark.parametrize("learner", ["lasso", "enet"])
def test_table_row_fifty_by_fifty(learner):
    result = _run(50, 100, 2, learner, 500)
    assert abs(result.bias) <= 0.012
    assert 0.039 <= result.sd <= 0.059
    assert 0.925 <= result.coverage <= 0.98
    # estimated variance tracks the sampling variance
    assert abs(result.mean_sigma2_over_cmin / result.empirical_variance - 1.0) <= 0.25


def test_ridge_breaks_down_with_many_covariates():
    result = _run(25, 200, 2, "ridge", 300)
    assert result.bias >= 0.10
    assert result.coverage <= 0.50


def test_more_folds_help_ridge():
    two = _run(25, 200, 2, "ridge", 300)
    three = _run(25, 200, 3, "ridge", 300)
    assert three.coverage - two.coverage >= 0.15


def test_root_c_rate():
    small = _run(25, 100, 2, "lasso", 300)
    large = _run(50, 100, 2, "lasso", 300)
    assert 0.50 <= large.sd / small.sd <= 0.80
