import numpy as np
import pytest
from hypothesis import settings

settings.register_profile("default", max_examples=40, deadline=None)
settings.load_profile("default")


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


_LOG_KEY = pytest.StashKey[list]()


def pytest_configure(config):
    config.stash[_LOG_KEY] = []


@pytest.fixture
def acceptance_log(request):
    """Collects one status line per acceptance criterion for the summary."""
    return request.config.stash[_LOG_KEY]


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LOG_KEY, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split("criterion ")[1].split(":")[0])):
            terminalreporter.write_line(line)
