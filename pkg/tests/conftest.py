import numpy as np
import pytest

from ensemble_rc import _backend

CRITERIA = {}


def record(number, ok, detail):
    """Store one acceptance outcome; printed in the terminal summary."""
    CRITERIA[number] = (bool(ok), detail)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}")


@pytest.fixture
def rng():
    return np.random.Generator(np.random.Philox(12345))


@pytest.fixture(params=_backend.available())
def kern(request):
    return _backend.get(request.param)
