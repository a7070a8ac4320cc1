import numpy as np
import pytest

from nematiclab import maier_saupe, sphere


@pytest.fixture(scope="session")
def grid8():
    return sphere.build_grid(8)


@pytest.fixture(scope="session")
def params8():
    return maier_saupe.equilibrium_params(8.0)


@pytest.fixture()
def rng():
    return np.random.default_rng(1234)


def random_density(grid, rng, amp=0.3):
    """Positive band-limited probability density."""
    c = rng.standard_normal(grid.ncoef) + 1j * rng.standard_normal(grid.ncoef)
    vals = grid.synthesize(c)
    vals = np.exp(amp * vals / np.max(np.abs(vals)))
    vals = sphere.project(grid, vals)
    assert np.min(vals) > 0
    return vals / sphere.integrate(grid, vals)
