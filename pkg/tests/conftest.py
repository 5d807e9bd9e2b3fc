import numpy as np
import pytest

from corner_flow import geometry as geo


@pytest.fixture
def curved():
    """Visibly curved walls given by raw coefficients."""
    return geo.CornerDomain(geo.WallProfile((0.03, 0.02), 1.0), geo.WallProfile((-0.02,), 1.0))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if not RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for num in sorted(RESULTS):
        passed, detail = RESULTS[num]
        terminalreporter.write_line(f"criterion {num}: {'PASS' if passed else 'FAIL'} - {detail}")
