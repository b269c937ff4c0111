import os

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from nurbsct.phantoms import make_phantom, simulate_data
from nurbsct.projector import FanBeamGeometry, MatrixCache

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile(os.environ.get("HYPOTHESIS_PROFILE", "default"))

# acceptance verdict lines, printed in the terminal summary
ACCEPTANCE = []


def record(criterion, ok, detail):
    ACCEPTANCE.append((criterion, bool(ok), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for crit, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"criterion {crit}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture(scope="session")
def cache():
    return MatrixCache()


@pytest.fixture(scope="session")
def geom6():
    return FanBeamGeometry.default(num_views=6)


@pytest.fixture(scope="session")
def omega1_data(geom6, cache):
    return simulate_data(make_phantom("omega1", 256), geom6, 0.1, seed=0, cache=cache)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
