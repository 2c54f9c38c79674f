import numpy as np
import pytest

from quadhull.corpus import box, load_corpus


@pytest.fixture(scope="session")
def corpus():
    """``{name: (instance, config)}`` for the bundled instances."""
    return {name: (inst, cfg) for name, inst, cfg in load_corpus()}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def square():
    return box(2)


# --- acceptance reporting ------------------------------------------------------------

_CRITERIA = {}


def pytest_configure(config):
    config.addinivalue_line("markers", "criterion(k, title): acceptance criterion number k")


def pytest_runtest_makereport(item, call):
    mark = item.get_closest_marker("criterion")
    if mark is None or call.when != "call":
        return
    k, title = mark.args
    ok = call.excinfo is None
    prev = _CRITERIA.get(k, (title, True))
    _CRITERIA[k] = (title, prev[1] and ok)


def pytest_terminal_summary(terminalreporter):
    if not _CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_CRITERIA):
        title, ok = _CRITERIA[k]
        terminalreporter.write_line(f"criterion {k:2d} {'PASS' if ok else 'FAIL'}  {title}")
