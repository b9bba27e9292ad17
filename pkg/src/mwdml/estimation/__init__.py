from mwdml.estimation.estimator import (  # noqa: F401
    EstimateReport,
    RepetitionResult,
    compute_gamma_multiway,
    compute_gamma_reference,
    estimate_theta,
    moment,
    run_dml,
    solve_theta,
)
from mwdml.estimation.fold_scores import FoldScores, build_fold_scores, fit_nuisances  # noqa: F401
from mwdml.estimation.variance import (  # noqa: F401
    confidence_interval,
    multiway_meat,
    reference_meat,
    variance,
)
