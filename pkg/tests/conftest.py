import numpy as np
import pytest
from hypothesis import settings

from dfib.grid import GridGeometry, StaggeredField, Subgrid, curl_h

settings.register_profile("default", max_examples=30, deadline=None)
settings.load_profile("default")


def random_field(geom, subgrid, rng, scale=1.0):
    from dfib.grid import n_components
    shape = (n_components(subgrid, geom.dim),) + geom.shape
    return StaggeredField(geom, subgrid, scale * rng.standard_normal(shape))


def random_div_free(geom, rng, mean=None):
    """Discrete curl of a random potential plus an optional uniform flow."""
    if geom.dim == 2:
        u = curl_h(random_field(geom, Subgrid.NODE, rng))
    else:
        u = curl_h(random_field(geom, Subgrid.EDGE, rng))
    if mean is not None:
        u = u + np.asarray(mean, dtype=float)
    return u


def power_scale(u, f, U, W):
    """Magnitude of the summands of both power sums; the sums themselves may cancel."""
    h3 = u.geometry.cell_volume
    return max(np.sum(np.abs(u.data * f.data)) * h3, np.sum(np.abs(U * W)))


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


@pytest.fixture(params=[2, 3], ids=["2d", "3d"])
def dim(request):
    return request.param


@pytest.fixture
def geom(dim):
    return GridGeometry(dim, 8)
