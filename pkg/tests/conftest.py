import numpy as np
import pytest

from mddconc.data import ConcurrentDataset


def make_dataset(n=12, p=2, T=5, seed=0, effect=0.0, grid=None):
    """Random complete dataset; ``effect`` adds X1 linearly to Y."""
    rng = np.random.default_rng(seed)
    x = rng.standard_normal((p, n, T))
    y = rng.standard_normal((n, T)) + effect * x[0]
    if grid is None:
        grid = np.linspace(0.0, 1.0, T)
    return ConcurrentDataset(grid=grid, response=y, covariates=x)


@pytest.fixture
def small_dataset():
    return make_dataset()
