"""
Monte Carlo studies of the multiway DML estimator

Replicate r draws its dataset from child_seed(master_seed, r, 0) and its
fold plan from child_seed(master_seed, r, 1), so results do not depend on
which worker runs which replicate or in what order.
"""
import logging
import math
import time
from dataclasses import dataclass, field
from typing import Dict, Iterable, List, Optional, Tuple

import numpy as np
import pandas as pd
from joblib import Parallel, delayed
from tqdm import tqdm

from mwdml.config.schema import DGPParams, DMLConfig, SimulationConfig
from mwdml.errors import InfeasiblePartitionError, InputError, MonteCarloAbortError, MultiwayDMLError
from mwdml.estimation.estimator import run_dml
from mwdml.score.pliv import OraclePLIVScore
from mwdml.simulation.dgp import generate_dgp, oracle_nuisance
from mwdml.utils.seeding import child_seed

logger = logging.getLogger(__name__)

MAX_FAILURE_SHARE = 0.01

TABLE_COLUMNS = [
    "N", "M", "C_min", "dim_x", "K", "K_pow", "learner",
    "bias", "sd", "rmse", "cover", "n_reps",
]


@dataclass
class ReplicateOutcome:
    index: int
    seed: int
    theta: float = math.nan
    se: float = math.nan
    sigma2: float = math.nan
    covered: bool = False
    runtime: float = 0.0
    error: Optional[str] = None

    @property
    def failed(self) -> bool:
        return self.error is not None


@dataclass
class MCResult:
    """
    Summary of a Monte Carlo run over the successful replicates.

    sd is the sample standard deviation (ddof=1) and rmse = sqrt(bias^2 + sd^2).
    With a single successful replicate sd is reported as 0 and sd_defined is False.
    """
    n_reps: int
    theta0: float
    level: float
    bias: float
    sd: float
    rmse: float
    coverage: float
    mean_runtime: float
    mean_se: float
    mean_sigma2_over_cmin: float
    empirical_variance: float
    sd_defined: bool = True
    n_failed: int = 0
    excluded_seeds: List[int] = field(default_factory=list)
    estimates: List[float] = field(default_factory=list)

    def to_dict(self) -> Dict:
        return {
            "n_reps": self.n_reps,
            "theta0": self.theta0,
            "level": self.level,
            "bias": self.bias,
            "sd": self.sd,
            "rmse": self.rmse,
            "coverage": self.coverage,
            "mean_runtime": self.mean_runtime,
            "mean_se": self.mean_se,
            "mean_sigma2_over_cmin": self.mean_sigma2_over_cmin,
            "empirical_variance": self.empirical_variance,
            "sd_defined": self.sd_defined,
            "n_failed": self.n_failed,
            "excluded_seeds": list(self.excluded_seeds),
        }


def _mean(values: Iterable[float]) -> float:
    values = list(values)
    return math.fsum(values) / len(values)


def run_replicate(dgp: DGPParams, dml: DMLConfig, index: int, master_seed: int, oracle: bool = False) -> ReplicateOutcome:
    """One replicate: fresh dataset, run_dml with S=1, coverage check."""
    data_seed = child_seed(master_seed, index, 0)
    outcome = ReplicateOutcome(index=index, seed=data_seed)
    start = time.perf_counter()
    try:
        params = dgp.model_copy(update={"seed": data_seed})
        dataset = generate_dgp(params)
        config = dml.model_copy(update={"S": 1, "seed": child_seed(master_seed, index, 1), "n_jobs": 1})
        score = OraclePLIVScore(oracle_nuisance(params)) if oracle else None
        report = run_dml(dataset, config, score=score)
    except (MultiwayDMLError, np.linalg.LinAlgError) as e:
        outcome.error = str(e)
    else:
        lo, hi = report.ci[0]
        outcome.theta = float(report.theta[0])
        outcome.se = float(report.se[0])
        outcome.sigma2 = float(report.sigma2[0, 0])
        outcome.covered = bool(lo <= dgp.theta0 <= hi)
    outcome.runtime = time.perf_counter() - start
    return outcome


def summarize(outcomes: List[ReplicateOutcome], theta0: float, level: float, c_min: int) -> MCResult:
    """
    Aggregate replicate outcomes, excluding failures when at most 1% failed.

    Raises:
        MonteCarloAbortError: more than 1% of replicates failed
    """
    outcomes = sorted(outcomes, key=lambda o: o.index)
    failed = [o for o in outcomes if o.failed]
    if len(failed) > MAX_FAILURE_SHARE * len(outcomes):
        raise MonteCarloAbortError(len(failed), len(outcomes), [o.seed for o in failed])
    for o in failed:
        logger.warning(f"Excluding replicate {o.index} (seed {o.seed}): {o.error}")

    kept = [o for o in outcomes if not o.failed]
    estimates = [o.theta for o in kept]
    center = _mean(estimates)
    bias = center - theta0
    if len(kept) > 1:
        empirical_variance = math.fsum((t - center) ** 2 for t in estimates) / (len(kept) - 1)
        sd_defined = True
    else:
        empirical_variance = 0.0
        sd_defined = False
    sd = math.sqrt(empirical_variance)
    return MCResult(
        n_reps=len(kept),
        theta0=theta0,
        level=level,
        bias=bias,
        sd=sd,
        rmse=math.sqrt(bias ** 2 + sd ** 2),
        coverage=sum(o.covered for o in kept) / len(kept),
        mean_runtime=_mean(o.runtime for o in kept),
        mean_se=_mean(o.se for o in kept),
        mean_sigma2_over_cmin=_mean(o.sigma2 / c_min for o in kept),
        empirical_variance=empirical_variance,
        sd_defined=sd_defined,
        n_failed=len(failed),
        excluded_seeds=[o.seed for o in failed],
        estimates=estimates,
    )


def monte_carlo(
    dgp: DGPParams,
    dml: DMLConfig,
    n_reps: int,
    master_seed: int,
    oracle: bool = False,
    n_jobs: int = 1,
    progress: bool = True,
) -> MCResult:
    """
    Repeat generate-then-estimate n_reps times.

    Args:
        dgp: Design parameters (the seed field is replaced per replicate)
        dml: Estimator settings (S is forced to 1)
        n_reps: Number of replicates
        master_seed: Seed every replicate's seeds are split from
        oracle: Plug in the true nuisance functions instead of fitting them
        n_jobs: Worker processes
        progress: Show a progress bar on stderr

    Returns:
        MCResult

    Raises:
        InfeasiblePartitionError: min(N, M) < K
        MonteCarloAbortError: more than 1% of replicates failed
    """
    if n_reps < 1:
        raise InputError(f"n_reps must be at least 1, got {n_reps}", module="simulate")
    if min(dgp.N, dgp.M) < dml.K:
        raise InfeasiblePartitionError(f"N={dgp.N}, M={dgp.M} cannot be split into K={dml.K} groups")

    desc = f"N={dgp.N} M={dgp.M} p={dgp.dim_x} K={dml.K} {dml.penalty.learner}"
    if n_jobs > 1:
        jobs = Parallel(n_jobs=n_jobs, backend="loky", return_as="generator")(
            delayed(run_replicate)(dgp, dml, r, master_seed, oracle) for r in range(n_reps)
        )
    else:
        jobs = (run_replicate(dgp, dml, r, master_seed, oracle) for r in range(n_reps))
    outcomes = list(tqdm(jobs, total=n_reps, desc=desc, disable=not progress))

    result = summarize(outcomes, dgp.theta0, dml.level, min(dgp.N, dgp.M))
    logger.info(
        f"{desc}: bias={result.bias:.4f} sd={result.sd:.4f} rmse={result.rmse:.4f} "
        f"cover={result.coverage:.3f} ({result.n_reps} reps, {result.n_failed} failed)"
    )
    return result


def table_row(dgp: DGPParams, dml: DMLConfig, result: MCResult, oracle: bool = False) -> Dict:
    return {
        "N": dgp.N,
        "M": dgp.M,
        "C_min": min(dgp.N, dgp.M),
        "dim_x": dgp.dim_x,
        "K": dml.K,
        "K_pow": dml.K ** 2,
        "learner": "oracle" if oracle else dml.penalty.learner,
        "bias": result.bias,
        "sd": result.sd,
        "rmse": result.rmse,
        "cover": result.coverage,
        "n_reps": result.n_reps,
    }


def results_table(rows: Iterable[Dict]) -> pd.DataFrame:
    """One row per (N, M, dim_x, K, learner) configuration."""
    return pd.DataFrame(list(rows), columns=TABLE_COLUMNS)


def run_grid(
    config: SimulationConfig,
    n_jobs: int = 1,
    progress: bool = True,
) -> Tuple[pd.DataFrame, List[MCResult]]:
    """
    Run every grid row and learner in config order.

    Every configuration is checked for feasibility before any replicate runs.
    """
    plan = []
    for row in config.grid:
        if min(row.N, row.M) < row.K:
            raise InfeasiblePartitionError(f"grid row N={row.N}, M={row.M} cannot be split into K={row.K} groups")
        for learner in row.learners:
            plan.append((config.dgp_params(row), config.dml_config(row, learner)))

    logger.info(f"Running {len(plan)} configuration(s) with {config.n_reps} replicates each")
    rows, results = [], []
    for dgp, dml in plan:
        result = monte_carlo(dgp, dml, config.n_reps, config.master_seed, config.oracle, n_jobs, progress)
        rows.append(table_row(dgp, dml, result, config.oracle))
        results.append(result)
    return results_table(rows), results
