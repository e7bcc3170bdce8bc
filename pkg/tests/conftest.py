import pytest

from parapat.comm import CommGroup, spawn_group

BACKENDS = ["threads", "sockets"]


@pytest.fixture(params=BACKENDS)
def backend(request):
    return request.param


def run(size, entry, backend="threads", seed=0, timeout=30.0):
    return spawn_group(size, entry, CommGroup(size, backend, seed, timeout))


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
