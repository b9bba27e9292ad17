"""
Command-line front end

    mwdml estimate  --config <yaml> [--data <csv>] [flags]   multiway DML on a CSV
    mwdml simulate  --config <yaml> [--reps N] [--seed S]     Monte Carlo grid
    mwdml partition --counts N,M --k K [--seed S]             fold plan preview

Exit codes: 0 success, 1 input or configuration error, 2 numerical failure.
"""
import argparse
import json
import logging
import os
import sys
from pathlib import Path
from typing import Any, Dict, List, Optional, Sequence

from mwdml import __version__
from mwdml.config.schema import EstimateConfig, SimulationConfig, load_yaml, parse_model
from mwdml.crossfit.folds import FoldPlan, estimation_cells, make_fold_plan, training_cells
from mwdml.data.io import load_dataset
from mwdml.errors import ConfigError, InputError, NumericalError
from mwdml.estimation.estimator import run_dml
from mwdml.simulation.monte_carlo import run_grid
from mwdml.utils.logging import setup_logging

logger = logging.getLogger("mwdml.cli")

GRID_LIMIT = 30


def resolve_threads(flag: Optional[int]) -> int:
    """--threads, then MWDML_THREADS, then the number of CPUs."""
    if flag is not None:
        value = flag
    elif os.getenv("MWDML_THREADS"):
        try:
            value = int(os.environ["MWDML_THREADS"])
        except ValueError as e:
            raise ConfigError(f"MWDML_THREADS must be an integer, got {os.environ['MWDML_THREADS']!r}") from e
    else:
        value = os.cpu_count() or 1
    if value < 1:
        raise ConfigError(f"thread count must be positive, got {value}")
    return value


def _set(document: Dict[str, Any], path: Sequence[str], value: Any):
    node = document
    for key in path[:-1]:
        child = node.get(key)
        if not isinstance(child, dict):
            child = {}
            node[key] = child
        node = child
    node[path[-1]] = value


def _write_json(payload: Dict, out: str):
    text = json.dumps(payload, indent=2, sort_keys=False)
    if out == "-":
        sys.stdout.write(text + "\n")
        return
    path = Path(out)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(text + "\n", encoding="utf-8")
    logger.info(f"Report written to {path}")


def estimate_document(args: argparse.Namespace) -> Dict[str, Any]:
    """Config file contents with command-line overrides applied."""
    document = load_yaml(args.config) if args.config else {}
    overrides = [
        (("data", "path"), args.data),
        (("dml", "K"), args.k),
        (("dml", "S"), args.s),
        (("dml", "seed"), args.seed),
        (("dml", "robustness"), args.robustness),
        (("dml", "split"), args.split),
        (("dml", "aggregation"), args.aggregation),
        (("dml", "level"), args.level),
        (("dml", "penalty", "learner"), args.learner),
        (("dml", "penalty", "enet_alpha"), args.alpha),
        (("output", "report"), args.out),
    ]
    for path, value in overrides:
        if value is not None:
            _set(document, path, value)
    if args.lambda_ is not None:
        _set(document, ("dml", "penalty", "lambda"), args.lambda_)
    elif args.cv:
        _set(document, ("dml", "penalty", "lambda"), None)
    return document


def cmd_estimate(args: argparse.Namespace) -> int:
    document = estimate_document(args)
    threads = resolve_threads(args.threads)
    _set(document, ("dml", "n_jobs"), threads)
    config = parse_model(EstimateConfig, document, where=str(args.config or "flags"))

    if not config.data.path:
        raise ConfigError("no data file: pass --data or set data.path")
    data_path = Path(config.data.path)
    if not data_path.exists():
        raise InputError(f"data file not found: {data_path}", module="data_model")

    logger.info(f"Loading {data_path}")
    dataset = load_dataset(data_path, config.data.mapping())
    logger.info(
        f"{dataset.n_obs} observations, cluster counts {list(dataset.cluster_counts)}, "
        f"{dataset.n_covariates} covariates; {config.dml.penalty.describe()}, "
        f"K={config.dml.K}, S={config.dml.S}, robustness={config.dml.robustness}"
    )

    report = run_dml(dataset, config.dml)
    report.config = config.model_dump(by_alias=True)
    for message in report.warnings:
        logger.warning(message)

    payload = report.to_dict()
    out = config.output.report
    if out:
        _write_json(payload, out)
    print(report.summary())
    return 0


def cmd_simulate(args: argparse.Namespace) -> int:
    document = load_yaml(args.config)
    if args.reps is not None:
        document["n_reps"] = args.reps
    if args.seed is not None:
        document["master_seed"] = args.seed
    if args.oracle:
        document["oracle"] = True
    if args.out is not None:
        document["output"] = args.out
    config = parse_model(SimulationConfig, document, where=str(args.config))
    threads = resolve_threads(args.threads)

    table, results = run_grid(config, n_jobs=threads, progress=not args.quiet)

    out = Path(config.output or "artifacts/results/simulation.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    echo = config.model_dump(by_alias=True)
    if out.suffix.lower() == ".json":
        details = []
        for result in results:
            entry = result.to_dict()
            entry.pop("mean_runtime")
            details.append(entry)
        payload = {"config": echo, "table": table.to_dict(orient="records"), "details": details}
        out.write_text(json.dumps(payload, indent=2) + "\n", encoding="utf-8")
    else:
        table.to_csv(out, index=False, float_format="%.6f")
        out.with_suffix(".config.json").write_text(json.dumps(echo, indent=2) + "\n", encoding="utf-8")
    logger.info(f"Table written to {out}")
    print(table.to_string(index=False, float_format=lambda v: f"{v:.3f}"))
    return 0


def render_fold_grid(plan: FoldPlan, fold) -> List[str]:
    """
    ASCII picture of one fold of a two-way plan.

    S marks estimation cells, N training (nuisance) cells, '.' cells the fold does not use.
    Rows are dimension-1 labels, columns dimension-2 labels.
    """
    score_cells = estimation_cells(plan, fold)
    nuisance_cells = training_cells(plan, fold)
    C1, C2 = plan.cluster_counts
    lines = [f"fold {tuple(k + 1 for k in fold)}"]
    for i in range(1, C1 + 1):
        row = []
        for j in range(1, C2 + 1):
            if (i, j) in score_cells:
                row.append("S")
            elif (i, j) in nuisance_cells:
                row.append("N")
            else:
                row.append(".")
        lines.append(" ".join(row))
    return lines


def parse_counts(text: str) -> List[int]:
    try:
        counts = [int(part) for part in text.split(",") if part.strip()]
    except ValueError as e:
        raise ConfigError(f"--counts must be comma-separated integers, got {text!r}") from e
    if not counts or any(c < 1 for c in counts):
        raise ConfigError(f"--counts must list positive integers, got {text!r}")
    return counts


def cmd_partition(args: argparse.Namespace) -> int:
    counts = parse_counts(args.counts)
    if not -(2 ** 63) <= args.seed < 2 ** 63:
        raise ConfigError(f"--seed must be a signed 64-bit integer, got {args.seed}")
    plan = make_fold_plan(counts, args.k, args.seed)
    payload = plan.to_dict()
    payload["group_sizes"] = {
        str(i + 1): [len(group) for group in dim_groups] for i, dim_groups in enumerate(plan.groups)
    }
    print(json.dumps(payload, indent=2))
    if plan.n_dims == 2 and max(counts) <= GRID_LIMIT:
        for fold in plan.folds():
            print()
            print("\n".join(render_fold_grid(plan, fold)))
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="mwdml", description="Multiway cluster-robust double machine learning")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    parser.add_argument("-v", "--verbose", action="store_true", help="Debug logging")
    parser.add_argument("-q", "--quiet", action="store_true", help="Warnings only, no progress bars")
    parser.add_argument("--log-file", default=None, help="Also write logs to this file")
    sub = parser.add_subparsers(dest="command", required=True)

    est = sub.add_parser("estimate", help="Estimate theta on a CSV")
    est.add_argument("--config", required=True, help="YAML config (data mapping and dml settings)")
    est.add_argument("--data", default=None, help="CSV file, overrides data.path")
    est.add_argument("--k", type=int, default=None, help="Groups per dimension")
    est.add_argument("--s", type=int, default=None, help="Cross-fitting repetitions")
    est.add_argument("--seed", type=int, default=None)
    est.add_argument("--robustness", default=None, help="zero | one:<dim> | multi")
    est.add_argument("--split", choices=["multiway", "matched"], default=None,
                     help="matched: zero-way and one-way inference cross-fit on their own splits")
    est.add_argument("--aggregation", choices=["mean", "median"], default=None)
    est.add_argument("--learner", choices=["lasso", "ridge", "enet", "zero"], default=None)
    est.add_argument("--alpha", type=float, default=None, help="Elastic-net mixing for --learner enet")
    penalty = est.add_mutually_exclusive_group()
    penalty.add_argument("--lambda", dest="lambda_", type=float, default=None, help="Fixed penalty")
    penalty.add_argument("--cv", action="store_true", help="Cross-validate the penalty")
    est.add_argument("--level", type=float, default=None, help="Confidence level, e.g. 0.95")
    est.add_argument("--out", default=None, help="JSON report path ('-' for stdout)")
    est.add_argument("--threads", type=int, default=None)
    est.set_defaults(handler=cmd_estimate)

    sim = sub.add_parser("simulate", help="Run a Monte Carlo grid")
    sim.add_argument("--config", required=True, help="YAML simulation config")
    sim.add_argument("--reps", type=int, default=None)
    sim.add_argument("--seed", type=int, default=None, help="Master seed")
    sim.add_argument("--oracle", action="store_true", help="Use the true nuisance functions")
    sim.add_argument("--out", default=None, help="Output table (.csv or .json)")
    sim.add_argument("--threads", type=int, default=None)
    sim.set_defaults(handler=cmd_simulate)

    part = sub.add_parser("partition", help="Preview a fold plan")
    part.add_argument("--counts", required=True, help="Cluster counts, e.g. 4,4")
    part.add_argument("--k", type=int, required=True)
    part.add_argument("--seed", type=int, default=0)
    part.set_defaults(handler=cmd_partition)
    return parser


def main(argv: Optional[Sequence[str]] = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.DEBUG if args.verbose else logging.WARNING if args.quiet else logging.INFO
    setup_logging("mwdml", level=level, log_file=args.log_file)

    try:
        return args.handler(args)
    except InputError as e:
        logger.error(str(e))
        return 1
    except NumericalError as e:
        logger.error(str(e))
        return 2


if __name__ == "__main__":
    sys.exit(main())
