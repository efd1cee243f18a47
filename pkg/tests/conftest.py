import functools

import pytest

from expanderlab.expanders import ExpanderShootingProblem, integrate_expander


@functools.lru_cache(maxsize=None)
def expander(mu=1.0, b=1.0, ds=1e-3, s_max=20.0):
    return integrate_expander(ExpanderShootingProblem(mu, b, ds, s_max))


@pytest.fixture(scope="session")
def expander_curve():
    return expander()


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for k in sorted(RESULTS):
            terminalreporter.write_line(RESULTS[k])
