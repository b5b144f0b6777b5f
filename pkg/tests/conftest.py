import numpy as np
import pytest

from vesiclebif.harmonics import build_grid
from vesiclebif.model import quartic_constitutive


@pytest.fixture(scope="session")
def con():
    """Default constitutive family: quartic well, constant moduli."""
    return quartic_constitutive()


@pytest.fixture(scope="session")
def con_varying():
    """Constitutive family with nonconstant bending moduli."""
    return quartic_constitutive(b1=0.3, e1=0.2)


@pytest.fixture(scope="session")
def grid8():
    return build_grid(8)


@pytest.fixture(scope="session")
def grid16():
    return build_grid(16)


def random_band_limited(l_max, grid, rng, amp=0.02, l_band=4):
    """Random spectral coefficients supported on degrees <= l_band with
    nodal amplitude roughly amp."""
    nb = (l_max + 1) ** 2
    nbl = (l_band + 1) ** 2
    c = np.zeros(nb)
    c[:nbl] = amp * rng.standard_normal(nbl) / np.sqrt(grid.norms2[:nbl])
    return c
