import pytest
from hypothesis import settings

from semigroup_lab.markov import random_reversible_chain, two_point_chain

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")

_ACCEPTANCE = []


@pytest.fixture
def criterion():
    """Record one acceptance line; the terminal summary prints them in order."""

    def record(number, ok, detail):
        line = f"{'PASS' if ok else 'FAIL'} criterion {number:2d}: {detail}"
        _ACCEPTANCE.append(line)
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE:
            terminalreporter.write_line(line)


@pytest.fixture
def two_point():
    return two_point_chain(1.0)


@pytest.fixture(params=[0, 1, 2, 3, 4])
def random_chain(request):
    return random_reversible_chain(4 + 2 * request.param, seed=request.param)
