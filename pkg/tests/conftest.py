import pytest

from drivendicke import ModelParams, solve


@pytest.fixture(scope="session")
def solved():
    """Memoized pipeline solutions keyed by parameter set."""
    cache = {}

    def get(**kwargs):
        params = ModelParams(**kwargs)
        if params not in cache:
            cache[params] = solve(params)
        return cache[params]

    return get


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import RESULTS
    except ImportError:
        return
    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
