import json
from pathlib import Path

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from svmrates.distributions import make_power_margin, make_separated, make_weighted_power_margin, sample

settings.register_profile("default", deadline=None, max_examples=40, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ORACLE = json.loads((Path(__file__).parent / "oracle" / "values.json").read_text())


@pytest.fixture(scope="session")
def oracle():
    return ORACLE


@pytest.fixture(scope="session")
def pm1():
    return make_power_margin(1.0)


@pytest.fixture(scope="session")
def pm2():
    return make_power_margin(2.0)


@pytest.fixture(scope="session")
def w12():
    return make_weighted_power_margin(1.0, 2.0)


@pytest.fixture(scope="session")
def sep1():
    return make_separated(0.5, 1)


@pytest.fixture(scope="session")
def sep2():
    return make_separated(0.5, 2)


@pytest.fixture
def small_set(pm1):
    return sample(pm1, 60, seed=123)


@pytest.fixture
def rng():
    return np.random.default_rng(2024)


def pytest_terminal_summary(terminalreporter):
    import sys

    mod = sys.modules.get("test_acceptance")
    if mod is not None and mod.RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in sorted(mod.RESULTS, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
