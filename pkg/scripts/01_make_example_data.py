"""
Script 1: Generate an example two-way clustered dataset
Writes one draw of the simulation design to data/example.csv
"""
import argparse
import sys
from pathlib import Path

# Add src to path
sys.path.insert(0, str(Path(__file__).parent.parent / "src"))

from mwdml.config.schema import DGPParams
from mwdml.data.io import export_dataset
from mwdml.simulation.dgp import generate_dgp
from mwdml.utils.logging import setup_logging

logger = setup_logging("mwdml")


def main():
    """Main function"""
    parser = argparse.ArgumentParser(description="Write a simulated two-way clustered CSV")
    parser.add_argument("--n", type=int, default=40, help="Clusters in dimension 1")
    parser.add_argument("--m", type=int, default=40, help="Clusters in dimension 2")
    parser.add_argument("--dim-x", type=int, default=20)
    parser.add_argument("--seed", type=int, default=2024)
    parser.add_argument("--out", default="data/example.csv")
    args = parser.parse_args()

    print("=" * 70)
    print("🧪 Example data")
    print("=" * 70)
    print()

    params = DGPParams(N=args.n, M=args.m, dim_x=args.dim_x, seed=args.seed)
    logger.info(f"Drawing N={params.N}, M={params.M}, dim_x={params.dim_x}, seed={params.seed}")
    dataset = generate_dgp(params)

    out = Path(args.out)
    out.parent.mkdir(parents=True, exist_ok=True)
    export_dataset(dataset, out)
    logger.info(f"✅ Saved {dataset.n_obs:,} observations to {out}")

    print()
    print("Next steps:")
    print("1. Estimate: python -m mwdml estimate --config config/estimate.yaml")
    print("2. Preview folds: python -m mwdml partition --counts 4,4 --k 2")


if __name__ == "__main__":
    main()
