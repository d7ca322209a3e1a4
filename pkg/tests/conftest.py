import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from regmod.critical import enumerate_critical_set
from regmod.model import get_instance

settings.register_profile(
    "repo", derandomize=True, max_examples=60, deadline=None,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def inst():
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = get_instance(name)
        return cache[name]

    return get


@pytest.fixture(scope="session")
def crit(inst):
    cache = {}

    def get(name):
        if name not in cache:
            cache[name] = enumerate_critical_set(inst(name))
        return cache[name]

    return get


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
