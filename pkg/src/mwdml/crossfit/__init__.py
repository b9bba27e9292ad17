from mwdml.crossfit.folds import (  # noqa: F401
    FoldPlan,
    estimation_cells,
    fold_assignment,
    fold_masks,
    make_fold_plan,
    split_view,
    training_cells,
)
