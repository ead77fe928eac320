from pathlib import Path

import numpy as np
import pytest

from persize import dataset

REPO_ROOT = Path(__file__).resolve().parent.parent
BUNDLED_INTERACTIONS = REPO_ROOT / "data" / "synth200" / "interactions.tsv"


@pytest.fixture(scope="session")
def bundled_path() -> Path:
    assert BUNDLED_INTERACTIONS.exists(), "bundled dataset missing"
    return BUNDLED_INTERACTIONS


@pytest.fixture(scope="session")
def bundled_split():
    """20-core filtered, densified, 60/20/20 split of the bundled log."""
    iset, _ = dataset.load_interactions(BUNDLED_INTERACTIONS)
    dense, _, _ = dataset.compact(dataset.kcore_filter(iset, 20))
    return dataset.split(dense, seed=0)


@pytest.fixture()
def tiny_split():
    """6 users x 8 items, every user with train, val and test items."""
    rng = np.random.default_rng(11)
    pairs = []
    for u in range(6):
        items = rng.choice(8, size=6, replace=False)
        pairs.extend((u, int(i)) for i in items)
    iset = dataset.InteractionSet.from_pairs(
        np.asarray(pairs), users=np.arange(6), items=np.arange(8)
    )
    return dataset.split(iset, seed=3)
