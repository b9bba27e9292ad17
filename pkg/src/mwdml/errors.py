"""
Exception hierarchy for mwdml

Input problems (exit code 1 in the CLI) derive from ``InputError``;
numerical failures (exit code 2) derive from ``NumericalError``.
"""
from typing import Optional, Sequence, Tuple


class MultiwayDMLError(Exception):
    """Base error; messages are prefixed with the module that raised them."""

    def __init__(self, message: str, module: str = "mwdml"):
        self.module = module
        self.detail = message
        super().__init__(f"{module}: {message}")


class InputError(MultiwayDMLError, ValueError):
    """Bad data, schema, configuration or infeasible request."""


class SchemaError(InputError):
    def __init__(self, message: str, column: Optional[str] = None):
        self.column = column
        super().__init__(message, module="data_model")


class ParseError(InputError):
    def __init__(self, message: str, row: int, column: str):
        self.row = row
        self.column = column
        super().__init__(f"{message} (row {row}, column {column!r})", module="data_model")


class EmptyInputError(InputError):
    def __init__(self, message: str = "input contains no observations"):
        super().__init__(message, module="data_model")


class DatasetValidationError(InputError):
    def __init__(self, message: str):
        super().__init__(message, module="data_model")


class InfeasiblePartitionError(InputError):
    def __init__(self, message: str):
        super().__init__(message, module="crossfit")


class FoldInfeasibleError(InputError):
    def __init__(self, fold: Tuple[int, ...], message: str = "training complement is empty"):
        self.fold = tuple(fold)
        super().__init__(f"fold {self.fold}: {message}", module="score")


class ConfigError(InputError):
    def __init__(self, message: str):
        super().__init__(message, module="config")


class NumericalError(MultiwayDMLError, ArithmeticError):
    """Estimation broke down numerically."""


class DegenerateIdentificationError(NumericalError):
    def __init__(self, singular_values: Sequence[float], threshold: float):
        self.singular_values = [float(s) for s in singular_values]
        super().__init__(
            f"Jacobian is singular in-sample: singular values {self.singular_values} "
            f"(threshold {threshold:g})",
            module="estimator",
        )


class NonPositiveVarianceError(NumericalError):
    def __init__(self, value: float):
        self.value = float(value)
        super().__init__(f"r' sigma2 r = {self.value!r} is not positive", module="estimator")


class MonteCarloAbortError(NumericalError):
    def __init__(self, n_failed: int, n_reps: int, seeds: Sequence[int]):
        self.n_failed = n_failed
        self.seeds = list(seeds)
        super().__init__(
            f"{n_failed} of {n_reps} replicates failed (limit 1%); failing seeds {self.seeds[:10]}",
            module="simulate",
        )


class ConvergenceWarning(UserWarning):
    """Coordinate descent stopped at max_iter, or a covariate had zero variance."""
