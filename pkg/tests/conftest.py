import numpy as np
import pytest

from heatobs.dynamics import NonlinearitySpec, solve_semilinear
from heatobs.ensembles import gaussian_bump
from heatobs.estimates import make_pair
from heatobs.grid import GridSpec
from heatobs.obsregion import build_region


@pytest.fixture(scope="session")
def spec1d():
    return GridSpec(1, 256, 10.0)


@pytest.fixture(scope="session")
def spec_region():
    return GridSpec(1, 512, 8.0)


@pytest.fixture(scope="session")
def region(spec_region):
    return build_region(spec_region, 1.0, 0.25)


@pytest.fixture(scope="session")
def mid_j(region):
    return region.ncubes // 2


def _difference_pair(spec, region, j, fspec, dt, stride, T=0.5):
    xj = region.centers[j]
    y1_0 = gaussian_bump(spec, xj, 0.6, 1.0)
    y2_0 = y1_0 + gaussian_bump(spec, np.asarray(xj) + 0.2, 0.4, 0.3)
    return make_pair(
        solve_semilinear(y1_0, fspec, T, dt, stride),
        solve_semilinear(y2_0, fspec, T, dt, stride),
    )


@pytest.fixture(scope="session")
def linear_pair(spec_region, region, mid_j):
    """Gaussian-difference linear-heat pair, snapshots every 0.01."""
    return _difference_pair(
        spec_region, region, mid_j, NonlinearitySpec("zero"), 0.001, 10
    )


@pytest.fixture(scope="session")
def cubic_pair(spec_region, region, mid_j):
    return _difference_pair(
        spec_region, region, mid_j, NonlinearitySpec("power_odd", 1.0, 3.0), 0.001, 10
    )
