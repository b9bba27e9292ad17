from mwdml.score.base import LinearScore, ScoreComponents  # noqa: F401
from mwdml.score.pliv import (  # noqa: F401
    OraclePLIVScore,
    PartiallyLinearIVScore,
    PLIVNuisance,
    evaluate_score,
    fit_nuisance_pliv,
    pliv_components,
    score_components,
)
