from mwdml.simulation.dgp import generate_dgp, oracle_nuisance, true_coefficients  # noqa: F401
from mwdml.simulation.monte_carlo import (  # noqa: F401
    MCResult,
    monte_carlo,
    results_table,
    run_grid,
    table_row,
)
