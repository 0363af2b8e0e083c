import numpy as np
import pytest

from prodt1 import build_haar, build_system
from prodt1.generators import multiscale_space, uniform_space
from prodt1.goodness import Frame, GoodnessParams
from prodt1.productseq import ProductFrame
from prodt1.space import from_coords


@pytest.fixture
def line3():
    return from_coords([0.0, 1.0, 2.0])


@pytest.fixture(scope="session")
def frames():
    """Two factor frames on small multiscale spaces with independent grids."""
    params = GoodnessParams.from_constants(1, 1.0, 2.0)
    out = []
    for s in (11, 12):
        sp = multiscale_space(3, 3, seed=s)
        D = build_system(sp, m=0, k=3, seed=100 + s)
        Dp = build_system(sp, m=0, k=3, seed=200 + s)
        out.append((sp, D, Dp, Frame(build_haar(D), Dp, params)))
    return out, params


@pytest.fixture(scope="session")
def product_frame(frames):
    (a, b), _ = frames
    return ProductFrame(a[3], b[3])


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture(scope="session")
def space64():
    return uniform_space(64, seed=3)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = next((m for n, m in sys.modules.items() if n.endswith("test_acceptance")), None)
    lines = getattr(mod, "LINES", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for k in sorted(lines):
            terminalreporter.write_line(lines[k])
