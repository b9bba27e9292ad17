"""
Multiway DML estimator

theta is the root of the cross-fitted empirical moment

    (1/K^l) sum_k E_{n,k}[psi_a] theta + (1/K^l) sum_k E_{n,k}[psi_b] = 0,

where E_{n,k} sums within-cell scores over the fold's cells and divides by
the number of cells. S rerandomized repetitions are aggregated by mean or
median, with the dispersion of the repetition estimates added to the
variance.
"""
import logging
import time
from dataclasses import dataclass, field
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from mwdml.config.schema import DMLConfig, robustness_mode
from mwdml.crossfit.folds import FoldPlan, make_fold_plan, split_view
from mwdml.data.dataset import MultiwayDataset, validate
from mwdml.errors import FoldInfeasibleError, InputError
from mwdml.estimation.fold_scores import FoldScores, build_fold_scores, fit_nuisances
from mwdml.estimation.variance import (
    check_invertible,
    confidence_interval,
    exact_sum,
    multiway_meat,
    reference_meat,
    variance,
)
from mwdml.score.base import LinearScore
from mwdml.score.pliv import PartiallyLinearIVScore
from mwdml.utils.seeding import child_seed

logger = logging.getLogger(__name__)


@dataclass
class RepetitionResult:
    """One cross-fitting repetition"""
    index: int
    plan_seed: int
    theta: np.ndarray
    jacobian: np.ndarray
    meat: np.ndarray
    sigma2: np.ndarray
    nuisance: Dict[str, dict] = field(default_factory=dict)

    @property
    def all_converged(self) -> bool:
        return all(
            entry.get("converged", True) for fold in self.nuisance.values() for entry in fold.values()
        )


@dataclass
class EstimateReport:
    """
    Result of run_dml.

    se is sqrt(diag(sigma2) / C_min); ci is one (lo, hi) pair per coordinate of theta.
    """
    theta: np.ndarray
    jacobian: np.ndarray
    meat: np.ndarray
    sigma2: np.ndarray
    se: np.ndarray
    ci: List[Tuple[float, float]]
    level: float
    c_min: int
    robustness: str
    K: int
    S: int
    seed: int
    aggregation: str
    per_repetition: List[RepetitionResult]
    warnings: List[str] = field(default_factory=list)
    config: Dict = field(default_factory=dict)
    runtime_seconds: float = 0.0
    split: str = "multiway"

    @property
    def nuisance_converged(self) -> bool:
        return all(rep.all_converged for rep in self.per_repetition)

    def summary(self) -> str:
        lo, hi = self.ci[0]
        return (
            f"theta={_scalar_or_list(self.theta)} se={_scalar_or_list(self.se)} "
            f"ci=[{lo:.6g}, {hi:.6g}] (robustness={self.robustness}, K={self.K}, S={self.S})"
        )

    def to_dict(self) -> Dict:
        ci = [{"level": self.level, "lo": lo, "hi": hi} for lo, hi in self.ci]
        return {
            "theta": _jsonable(self.theta),
            "se": _jsonable(self.se),
            "ci": ci[0] if len(ci) == 1 else ci,
            "sigma2": _jsonable(self.sigma2),
            "jacobian": _jsonable(self.jacobian),
            "meat": _jsonable(self.meat),
            "c_min": self.c_min,
            "robustness": self.robustness,
            "split": self.split,
            "K": self.K,
            "S": self.S,
            "seed": self.seed,
            "aggregation": self.aggregation,
            "per_repetition": [
                {
                    "index": rep.index,
                    "plan_seed": rep.plan_seed,
                    "theta": _jsonable(rep.theta),
                    "sigma2": _jsonable(rep.sigma2),
                    "jacobian": _jsonable(rep.jacobian),
                    "meat": _jsonable(rep.meat),
                    "nuisance": rep.nuisance,
                }
                for rep in self.per_repetition
            ],
            "nuisance_converged": self.nuisance_converged,
            "warnings": list(self.warnings),
            "config": self.config,
            "runtime_seconds": self.runtime_seconds,
        }


def _jsonable(value):
    array = np.asarray(value, dtype=float)
    if array.size == 1:
        return float(array.reshape(-1)[0])
    return array.tolist()


def _scalar_or_list(value) -> str:
    array = np.asarray(value, dtype=float).reshape(-1)
    if array.size == 1:
        return f"{array[0]:.6g}"
    return "[" + ", ".join(f"{v:.6g}" for v in array) + "]"


def solve_theta(fold_scores: Sequence[FoldScores]) -> Tuple[np.ndarray, np.ndarray]:
    """
    Closed-form root theta = -J^-1 (1/K^l) sum_k E_{n,k}[psi_b].

    Returns:
        (theta of shape (d,), J of shape (d, d))
    """
    J = exact_sum(np.array([fs.mean_a() for fs in fold_scores])) / len(fold_scores)
    b = exact_sum(np.array([fs.mean_b() for fs in fold_scores])) / len(fold_scores)
    J = check_invertible(J)
    theta = -np.linalg.solve(J, b)
    return theta, J


def moment(fold_scores: Sequence[FoldScores], theta) -> np.ndarray:
    """Cross-fitted empirical moment (1/K^l) sum_k E_{n,k}[psi(W; theta, eta_k)]."""
    return sum(fs.psi(theta).sum(axis=0) / fs.n_cells for fs in fold_scores) / len(fold_scores)


def estimate_theta(
    dataset: MultiwayDataset,
    plan: FoldPlan,
    nuisances: Mapping[Tuple[int, ...], object],
    score: Optional[LinearScore] = None,
) -> Tuple[np.ndarray, np.ndarray]:
    """
    Multiway DML estimate from fitted nuisances.

    Args:
        dataset: Multiway dataset
        plan: Fold plan the nuisances were fitted on
        nuisances: Nuisance per fold id
        score: Score definition (partially linear IV by default)

    Returns:
        (theta, J)

    Raises:
        DegenerateIdentificationError: J is singular in-sample
    """
    return solve_theta(build_fold_scores(dataset, plan, nuisances, score))


def compute_gamma_multiway(dataset, plan, nuisances, theta, score=None) -> np.ndarray:
    """Multiway meat Gamma-hat at theta."""
    return multiway_meat(build_fold_scores(dataset, plan, nuisances, score), theta, plan.cluster_counts)


def compute_gamma_reference(dataset, plan, nuisances, theta, mode: str, score=None) -> np.ndarray:
    """
    Zero-way or one-way meat at theta.

    Args:
        mode: "zero", or "one:<dim>" with a 1-based dimension
    """
    try:
        kind, dim = robustness_mode(mode)
    except ValueError as e:
        raise InputError(str(e), module="estimator") from e
    return reference_meat(
        build_fold_scores(dataset, plan, nuisances, score), theta, plan.cluster_counts, kind, dim
    )


def _meat(fold_scores, theta, cluster_counts, robustness: str, c_min: Optional[int] = None) -> np.ndarray:
    kind, dim = robustness_mode(robustness)
    if kind == "multi":
        return multiway_meat(fold_scores, theta, cluster_counts)
    return reference_meat(fold_scores, theta, cluster_counts, kind, dim, c_min=c_min)


def _aggregate(values: Sequence[np.ndarray], how: str) -> np.ndarray:
    stacked = np.array(values, dtype=float)
    if how == "median":
        return np.median(stacked, axis=0)
    return exact_sum(stacked) / stacked.shape[0]


def run_repetition(
    dataset: MultiwayDataset,
    plan: FoldPlan,
    config: DMLConfig,
    score: LinearScore,
    index: int = 0,
    n_jobs: int = 1,
    robustness: Optional[str] = None,
    c_min: Optional[int] = None,
) -> Tuple[RepetitionResult, List[str]]:
    """
    Fit nuisances, solve for theta and compute the sandwich for one fold plan.

    robustness and c_min override the config's meat and the dataset's own
    C-underbar; a matched split passes its view's meat with the full design's C-underbar.
    """
    nuisances = fit_nuisances(dataset, plan, score, config.penalty, n_jobs=n_jobs)
    fold_scores = build_fold_scores(dataset, plan, nuisances, score)
    theta, J = solve_theta(fold_scores)
    gamma = _meat(fold_scores, theta, plan.cluster_counts, robustness or config.robustness, c_min)
    sigma2 = variance(J, gamma)
    diagnostics = {",".join(str(k + 1) for k in fold): score.diagnostics(n) for fold, n in nuisances.items()}
    messages = [m for n in nuisances.values() for m in score.warnings(n)]
    result = RepetitionResult(
        index=index, plan_seed=plan.seed, theta=theta, jacobian=J, meat=gamma, sigma2=sigma2, nuisance=diagnostics
    )
    return result, messages


def _crossfit_target(dataset: MultiwayDataset, config: DMLConfig) -> Tuple[MultiwayDataset, str]:
    """Dataset the folds are drawn on, and the meat to compute on its folds."""
    kind, dim = config.robustness_mode
    if dim is not None and dim >= dataset.n_dims:
        raise InputError(
            f"robustness {config.robustness} names a dimension of {dataset.n_dims}-way data that does not exist",
            module="estimator",
        )
    if config.split == "multiway" or kind == "multi":
        return dataset, config.robustness
    view = split_view(dataset, config.robustness)
    return view, "zero" if kind == "zero" else "one:1"


def run_dml(
    dataset: MultiwayDataset,
    config: DMLConfig,
    score: Optional[LinearScore] = None,
    plans: Optional[Sequence[FoldPlan]] = None,
) -> EstimateReport:
    """
    Multiway DML with S rerandomized cross-fitting repetitions.

    Repetition s draws its plan from seed child_seed(config.seed, s). The
    aggregated variance is agg_s[sigma2_s + C_min (theta_s - theta)(theta_s - theta)'].

    With split="matched", zero-way inference cross-fits on K groups of single
    observations and one-way(i) inference on K groups of dimension-i clusters;
    the multiway K^l plan is used otherwise.

    Args:
        dataset: Multiway dataset
        config: Estimation settings
        score: Score definition (partially linear IV by default)
        plans: Explicit fold plans, one per repetition, overriding the seeded draws;
            under a matched split they partition the split view's clusters

    Returns:
        EstimateReport
    """
    start = time.perf_counter()
    score = score or PartiallyLinearIVScore()
    validate(dataset)
    c_min = dataset.min_clusters
    if plans is not None and len(plans) != config.S:
        raise InputError(f"{len(plans)} plans given for S={config.S}", module="estimator")
    target, meat_mode = _crossfit_target(dataset, config)
    if target is not dataset:
        logger.info(f"Matched split for robustness={config.robustness}: {target.cluster_counts[0]} units, K={config.K}")

    repetitions: List[RepetitionResult] = []
    messages: List[str] = []
    for s in range(config.S):
        plan = plans[s] if plans is not None else make_fold_plan(
            target.cluster_counts, config.K, child_seed(config.seed, s)
        )
        try:
            result, notes = run_repetition(
                target, plan, config, score, index=s, n_jobs=config.n_jobs, robustness=meat_mode, c_min=c_min
            )
        except FoldInfeasibleError as e:
            logger.error(f"Repetition {s} (plan seed {plan.seed}) is infeasible: {e}")
            raise
        repetitions.append(result)
        messages.extend(f"repetition {s}: {m}" for m in notes)
        logger.info(
            f"Repetition {s + 1}/{config.S}: theta={_scalar_or_list(result.theta)} "
            f"sigma2={_scalar_or_list(np.diag(result.sigma2))}"
        )

    theta = _aggregate([rep.theta for rep in repetitions], config.aggregation)
    corrected = []
    for rep in repetitions:
        gap = rep.theta - theta
        corrected.append(rep.sigma2 + c_min * np.outer(gap, gap))
    sigma2 = _aggregate(corrected, config.aggregation)
    sigma2 = 0.5 * (sigma2 + sigma2.T)
    se = np.sqrt(np.maximum(np.diag(sigma2), 0.0) / c_min)

    ci = []
    for coord in range(theta.size):
        r = np.zeros(theta.size)
        r[coord] = 1.0
        ci.append(confidence_interval(theta, sigma2, c_min, config.a, r))

    report = EstimateReport(
        theta=theta,
        jacobian=_aggregate([rep.jacobian for rep in repetitions], config.aggregation),
        meat=_aggregate([rep.meat for rep in repetitions], config.aggregation),
        sigma2=sigma2,
        se=se,
        ci=ci,
        level=config.level,
        c_min=c_min,
        robustness=config.robustness,
        K=config.K,
        S=config.S,
        seed=config.seed,
        aggregation=config.aggregation,
        per_repetition=repetitions,
        warnings=messages,
        config=config.model_dump(by_alias=True),
        runtime_seconds=time.perf_counter() - start,
        split=config.split,
    )
    return report
