import numpy as np
import pytest

from optattack import kernels
from optattack.models import LinearModel, RadialModel
from optattack.oracle import Oracle

BACKENDS = kernels.available_backends()

_acceptance = {}


@pytest.fixture(params=BACKENDS)
def backend(request):
    return kernels.load_backend(request.param)


@pytest.fixture
def radial_oracle():
    return Oracle(RadialModel(0.4, 2))


@pytest.fixture
def linear_oracle():
    return Oracle(LinearModel(np.array([1.0, 0.0]), 0.5))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    mark = item.get_closest_marker("acceptance")
    if mark is None:
        return
    number, title = mark.args
    if rep.when == "call" or rep.failed:
        prev = _acceptance.get(number)
        if prev is None or prev[1] == "PASS":
            _acceptance[number] = (title, "PASS" if rep.passed else "FAIL")


def pytest_terminal_summary(terminalreporter):
    if not _acceptance:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_acceptance):
        title, verdict = _acceptance[number]
        terminalreporter.write_line(f"[{verdict}] criterion {number}: {title}")
