"""
Configuration models

Config files are YAML documents; each section is validated by one of the
pydantic models below. Defaults here are the package defaults, config files
override them and CLI flags override config files.
"""
from pathlib import Path
from typing import Annotated, Any, Dict, List, Literal, Optional, Tuple, Type, TypeVar

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from mwdml.errors import ConfigError

M = TypeVar("M", bound=BaseModel)

# signed 64-bit
Seed = Annotated[int, Field(ge=-(2 ** 63), lt=2 ** 63)]

LEARNER_ALPHA = {"lasso": 1.0, "ridge": 0.0, "zero": 1.0}

ROBUSTNESS_ALIASES = {
    "zero": "zero",
    "zero-way": "zero",
    "iid": "zero",
    "multi": "multi",
    "multiway": "multi",
    "two-way": "multi",
}


def normalize_robustness(value: str) -> str:
    """Canonical robustness name: zero, one:<dim> (1-based) or multi."""
    text = str(value).strip().lower()
    if text in ROBUSTNESS_ALIASES:
        return ROBUSTNESS_ALIASES[text]
    for prefix in ("one-way:", "one:", "oneway:"):
        if text.startswith(prefix):
            dim = text[len(prefix):]
            if not dim.isdigit() or int(dim) < 1:
                raise ValueError(f"one-way dimension must be a positive integer, got {dim!r}")
            return f"one:{int(dim)}"
    raise ValueError(f"unknown robustness {value!r}; expected zero, one:<dim> or multi")


def robustness_mode(value: str) -> Tuple[str, Optional[int]]:
    """('zero', None), ('one', zero-based dim) or ('multi', None)."""
    name = normalize_robustness(value)
    if name.startswith("one:"):
        return "one", int(name.split(":")[1]) - 1
    return name, None


class _Frozen(BaseModel):
    model_config = ConfigDict(frozen=True, extra="forbid", populate_by_name=True)


class CVSettings(_Frozen):
    """Cross-validated penalty: geometric grid from lambda_max down to ratio * lambda_max."""
    n_grid: int = Field(default=50, ge=1)
    ratio: float = Field(default=1e-3, gt=0, le=1)
    n_folds: int = Field(default=5, ge=2)
    seed: Seed = 0
    grid: Optional[List[float]] = None

    @field_validator("grid")
    @classmethod
    def _check_grid(cls, grid):
        if grid is None:
            return grid
        if not grid:
            raise ValueError("explicit grid must not be empty")
        if any(v < 0 for v in grid):
            raise ValueError("grid values must be non-negative")
        return sorted(grid, reverse=True)


class PenaltyConfig(_Frozen):
    """Penalized regression settings for the nuisance learners."""
    learner: Literal["lasso", "ridge", "enet", "zero"] = "lasso"
    enet_alpha: float = Field(default=0.5, ge=0, le=1)
    lambda_: Optional[float] = Field(default=None, alias="lambda", ge=0)
    cv: CVSettings = CVSettings()
    max_iter: int = Field(default=10_000, ge=1)
    tol: float = Field(default=1e-7, gt=0)
    standardize: bool = True

    @property
    def alpha(self) -> float:
        """Elastic-net mixing: 1 is lasso, 0 is ridge."""
        if self.learner == "enet":
            return self.enet_alpha
        return LEARNER_ALPHA[self.learner]

    @property
    def is_fixed(self) -> bool:
        return self.lambda_ is not None

    def describe(self) -> str:
        lam = f"lambda={self.lambda_:g}" if self.is_fixed else f"cv({self.cv.n_folds} folds)"
        return f"{self.learner}(alpha={self.alpha:g}, {lam})"


class DMLConfig(_Frozen):
    """
    Estimation settings.

    split="multiway" cross-fits every robustness mode on one K^l plan;
    "matched" gives zero-way and one-way inference their own K-fold split.
    """
    K: int = Field(default=2, ge=2)
    seed: Seed = 0
    S: int = Field(default=1, ge=1)
    penalty: PenaltyConfig = PenaltyConfig()
    robustness: str = "multi"
    split: Literal["multiway", "matched"] = "multiway"
    aggregation: Literal["mean", "median"] = "mean"
    level: float = Field(default=0.95, gt=0, lt=1)
    n_jobs: int = Field(default=1, ge=1)

    @field_validator("robustness")
    @classmethod
    def _normalize_robustness(cls, value: str) -> str:
        return normalize_robustness(value)

    @property
    def a(self) -> float:
        """Significance level of the confidence interval."""
        return 1.0 - self.level

    @property
    def robustness_mode(self) -> Tuple[str, Optional[int]]:
        return robustness_mode(self.robustness)


class DGPWeights(_Frozen):
    """(omega1, omega2) weights on the row and column components."""
    x: Tuple[float, float] = (0.25, 0.25)
    eps: Tuple[float, float] = (0.25, 0.25)
    ups: Tuple[float, float] = (0.25, 0.25)
    v: Tuple[float, float] = (0.25, 0.25)

    @model_validator(mode="after")
    def _check_sums(self):
        for name in ("x", "eps", "ups", "v"):
            w1, w2 = getattr(self, name)
            if w1 < 0 or w2 < 0 or w1 + w2 > 1:
                raise ValueError(f"weights for {name} must be non-negative with sum <= 1, got {(w1, w2)}")
        return self


class DGPDefaults(_Frozen):
    theta0: float = 1.0
    pi10: float = 1.0
    s_x: float = Field(default=0.25, ge=0, lt=1)
    s_eps_ups: float = Field(default=0.25, gt=-1, lt=1)
    weights: DGPWeights = DGPWeights()


class DGPParams(DGPDefaults):
    N: int = Field(ge=1)
    M: int = Field(ge=1)
    dim_x: int = Field(ge=1)
    seed: Seed = 0


class GridRow(_Frozen):
    N: int = Field(ge=1)
    M: int = Field(ge=1)
    dim_x: int = Field(ge=1)
    K: int = Field(ge=2)
    learners: List[Literal["lasso", "ridge", "enet", "zero"]] = ["lasso"]


class SimulationConfig(_Frozen):
    n_reps: int = Field(default=500, ge=1)
    master_seed: Seed = 0
    oracle: bool = False
    dgp: DGPDefaults = DGPDefaults()
    dml: DMLConfig = DMLConfig()
    grid: List[GridRow] = Field(min_length=1)
    output: Optional[str] = None

    def dgp_params(self, row: GridRow, seed: int = 0) -> DGPParams:
        return DGPParams(N=row.N, M=row.M, dim_x=row.dim_x, seed=seed, **self.dgp.model_dump())

    def dml_config(self, row: GridRow, learner: str) -> DMLConfig:
        penalty = self.dml.penalty.model_copy(update={"learner": learner})
        return self.dml.model_copy(update={"K": row.K, "S": 1, "penalty": penalty})


class DataSection(_Frozen):
    path: Optional[str] = None
    index_cols: List[str] = Field(min_length=1)
    y_col: str
    d_col: str
    z_col: str
    x_cols: Optional[List[str]] = None
    x_prefix: Optional[str] = None

    @model_validator(mode="after")
    def _check_covariates(self):
        if not self.x_cols and not self.x_prefix:
            raise ValueError("either x_cols or x_prefix must be given")
        return self

    def mapping(self):
        from mwdml.data.dataset import ColumnMapping

        return ColumnMapping(
            index_cols=tuple(self.index_cols),
            y_col=self.y_col,
            d_col=self.d_col,
            z_col=self.z_col,
            x_cols=tuple(self.x_cols) if self.x_cols else None,
            x_prefix=self.x_prefix,
        )


class OutputSection(_Frozen):
    report: Optional[str] = "artifacts/results/estimate_report.json"


class EstimateConfig(_Frozen):
    data: DataSection
    dml: DMLConfig = DMLConfig()
    output: OutputSection = OutputSection()


def load_yaml(config_path) -> Dict[str, Any]:
    """Load a YAML config document"""
    path = Path(config_path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    try:
        with open(path, 'r', encoding="utf-8") as f:
            data = yaml.safe_load(f)
    except yaml.YAMLError as e:
        raise ConfigError(f"cannot parse {path}: {e}") from e
    if data is None:
        return {}
    if not isinstance(data, dict):
        raise ConfigError(f"{path}: top level must be a mapping")
    return data


def parse_model(model: Type[M], data: Dict[str, Any], where: str = "config") -> M:
    """Validate a config section, turning pydantic errors into ConfigError."""
    try:
        return model.model_validate(data)
    except ValidationError as e:
        problems = "; ".join(
            f"{'.'.join(str(p) for p in err['loc']) or '<root>'}: {err['msg']}" for err in e.errors()
        )
        raise ConfigError(f"{where}: {problems}") from e
