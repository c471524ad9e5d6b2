import numpy as np
import pytest

from ftkreg import Curve, FunctionalDataset, Grid, Observation


def make_dataset(grid, rows, delta=1.0):
    """rows: list of (curve values, y or None). zeta follows y."""
    obs = []
    for k, (values, y) in enumerate(rows, start=1):
        obs.append(
            Observation(
                t=k * delta,
                x=Curve(grid, np.asarray(values, dtype=float)),
                y=y,
                zeta=0 if y is None else 1,
            )
        )
    return FunctionalDataset(obs, delta)


def spike_dataset(grid, ys, spike=3.0):
    """Curves with unit-height spikes at distinct interior grid points.

    Every curve sits at the same L2 distance from the zero curve, so kernel
    weights at the zero query are equal: handy for hand-computable examples.
    """
    rows = []
    for k, y in enumerate(ys):
        values = np.zeros(grid.n_points)
        values[5 + 3 * k] = spike
        rows.append((values, y))
    return make_dataset(grid, rows)


def random_dataset(rng, grid, n, missing=0.3, delta=1.0):
    rows = []
    for _ in range(n):
        values = rng.normal(size=grid.n_points).cumsum() * grid.spacing
        y = None if rng.random() < missing else float(rng.normal())
        rows.append((values, y))
    return make_dataset(grid, rows, delta)


@pytest.fixture
def grid20():
    return Grid(0.0, 1.0, 20)


@pytest.fixture
def grid50():
    return Grid(-1.0, 1.0, 50)


@pytest.fixture
def rng():
    return np.random.default_rng(20240817)
