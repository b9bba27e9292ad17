from mwdml.models.elastic_net import (  # noqa: F401
    LinearFit,
    fit_elastic_net,
    kkt_residual,
    objective,
    predict,
    zero_fit,
)
from mwdml.models.cv import fit_penalized, lambda_grid, select_lambda_cv  # noqa: F401
