import numpy as np
import pytest

from cocyclelab import cocycle


@pytest.fixture(scope="session")
def golden():
    return cocycle.golden_base()


@pytest.fixture(scope="session")
def schrodinger3(golden):
    """The strong-coupling workhorse family: sampling 6 cos(2 pi x)."""
    return cocycle.SchrodingerFamily(
        base=golden, dim=2, coupling=3.0, param_values=np.array([0.0])
    )


@pytest.fixture(scope="session")
def schrodinger_ladder(schrodinger3):
    """Exponent ladder n = 2^4 .. 2^12 at the default grid, shared by the
    rate, monotonicity and positivity tests."""
    scales = tuple(2**k for k in range(4, 13))
    return scales, schrodinger3.exponent_ladder(0.0, scales, 1024)
