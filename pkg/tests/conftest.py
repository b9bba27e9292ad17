"""
Shared fixtures
"""
import os
import sys
from pathlib import Path

import numpy as np
import pytest

ROOT = Path(__file__).resolve().parent.parent

# Add src to path
sys.path.insert(0, str(ROOT / "src"))

from mwdml.data.dataset import MultiwayDataset  # noqa: E402


def pytest_collection_modifyitems(config, items):
    if os.getenv("MWDML_RUN_SLOW") == "1":
        return
    skip = pytest.mark.skip(reason="set MWDML_RUN_SLOW=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def repo_root() -> Path:
    return ROOT


@pytest.fixture
def iv_ratio_csv() -> Path:
    return ROOT / "tests" / "fixtures" / "iv_ratio.csv"


def random_dataset(rng, counts, p=3, max_occupancy=2, fill=0.8) -> MultiwayDataset:
    """Random multiway dataset with 0..max_occupancy observations per cell."""
    cells = np.array(list(np.ndindex(*counts))) + 1
    index = []
    for cell in cells:
        k = rng.integers(1, max_occupancy + 1) if rng.random() < fill else 0
        index.extend([cell] * k)
    if not index:
        index = [cells[0]]
    index = np.array(index)
    n = index.shape[0]
    X = rng.standard_normal((n, p))
    z = X[:, 0] + rng.standard_normal(n)
    d = z + 0.5 * X[:, 1] + rng.standard_normal(n)
    y = d + X[:, 2 % p] + rng.standard_normal(n)
    return MultiwayDataset(cluster_index=index, cluster_counts=tuple(counts), y=y, d=d, z=z, X=X)


@pytest.fixture
def make_dataset():
    return random_dataset
