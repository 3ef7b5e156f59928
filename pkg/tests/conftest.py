import numpy as np
import pytest

from finslerlab.geodesics import default_frame, parallel_frame
from finslerlab.hypersurface import shape_operator
from finslerlab.metrics import metric_from_name


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def randers():
    return metric_from_name("hyperbolic-randers:k=1,eps=0.05")


@pytest.fixture(scope="session")
def randers3():
    return metric_from_name("hyperbolic-randers:k=1,eps=0.05,dim=3")


def normal_geodesic(surface, index, T):
    """Parallel frame along the normal geodesic of one sample and the frame shape operator."""
    u = surface.samples[index: index + 1]
    S = shape_operator(surface, u)
    nd = S.normals
    E0 = default_frame(surface.metric, nd.foot[0], nd.normal[0], first=nd.tangents[0])
    frame = parallel_frame(surface.metric, (nd.foot, nd.normal, T), E0[None])
    return frame, S.frame_matrix(E0[None])[0]


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
