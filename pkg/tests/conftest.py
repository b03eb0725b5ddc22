import numpy as np
import pytest

from smectic.assembly import Discretization
from smectic.mesh import build_structured_rect


def pytest_addoption(parser):
    parser.addoption("--runslow", action="store_true", default=False,
                     help="also run the full-resolution reproduction")


def pytest_collection_modifyitems(config, items):
    if config.getoption("--runslow"):
        return
    skip = pytest.mark.skip(reason="slow; use --runslow")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


_DISCS = {}


def get_disc(nx, bounds=(-1.0, 1.0, -1.0, 1.0)):
    key = (nx, tuple(bounds))
    if key not in _DISCS:
        _DISCS[key] = Discretization(build_structured_rect(nx, bounds))
    return _DISCS[key]


@pytest.fixture
def disc2():
    return get_disc(2)


@pytest.fixture
def disc4():
    return get_disc(4)


@pytest.fixture
def disc8():
    return get_disc(8)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    import sys
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "RESULTS", None)
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in lines:
            terminalreporter.write_line(line)
