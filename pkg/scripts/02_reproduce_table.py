"""
Script 2: Reproduce the Monte Carlo table
Runs every row of config/simulation/two_way_grid.yaml and saves the table
"""
import argparse
import json
import sys
import time
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from mwdml.cli import resolve_threads
from mwdml.config.schema import SimulationConfig, load_yaml, parse_model
from mwdml.simulation.monte_carlo import run_grid
from mwdml.utils.logging import setup_logging

logger = setup_logging("mwdml")


def main():
    """Main function"""
    parser = argparse.ArgumentParser(description="Reproduce the simulation table")
    parser.add_argument("--config", default="config/simulation/two_way_grid.yaml")
    parser.add_argument("--reps", type=int, default=None)
    parser.add_argument("--threads", type=int, default=None)
    args = parser.parse_args()

    print("=" * 70)
    print("📊 Monte Carlo table")
    print("=" * 70)
    print()

    document = load_yaml(args.config)
    if args.reps is not None:
        document["n_reps"] = args.reps
    config = parse_model(SimulationConfig, document, where=args.config)
    threads = resolve_threads(args.threads)
    logger.info(f"Loaded {args.config}: {len(config.grid)} rows, {config.n_reps} replicates, {threads} workers")

    start = time.perf_counter()
    table, results = run_grid(config, n_jobs=threads)
    elapsed = time.perf_counter() - start

    out = Path(config.output or "artifacts/results/two_way_grid.csv")
    out.parent.mkdir(parents=True, exist_ok=True)
    table.to_csv(out, index=False, float_format="%.6f")
    details = out.with_suffix(".details.json")
    details.write_text(json.dumps([r.to_dict() for r in results], indent=2) + "\n", encoding="utf-8")

    logger.info(f"💾 Saved table to {out} and details to {details}")
    logger.info(f"Total time: {elapsed / 60:.1f} min")

    print()
    print(table.to_string(index=False, float_format=lambda v: f"{v:.3f}"))
    print()
    print("=" * 70)
    print("🎉 Done!")
    print("=" * 70)


if __name__ == "__main__":
    main()
