import numpy as np
import pytest

from bkm_manifold import build_model
from bkm_manifold.sampling import case_rng

_ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def acceptance_log():
    return _ACCEPTANCE_LINES


@pytest.fixture
def rng(request):
    # one reproducible stream per test, keyed by its name
    key = sum(ord(c) * (i + 1) for i, c in enumerate(request.node.name)) % (2**31)
    return case_rng(20261017, key)


@pytest.fixture(params=[2, 4, 8])
def ho(request):
    return build_model("harmonic_oscillator", request.param)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def assert_close_matrix(a, b, tol):
    a = np.asarray(a.entries if hasattr(a, "entries") else a)
    b = np.asarray(b.entries if hasattr(b, "entries") else b)
    assert np.max(np.abs(a - b)) <= tol, np.max(np.abs(a - b))
