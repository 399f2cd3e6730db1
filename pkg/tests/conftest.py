import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from stlplan.config import bundled, load_scenario
from stlplan.sim import run_scenario

settings.register_profile("default", deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def station_cfg():
    return load_scenario(bundled("station"))


@pytest.fixture(scope="session")
def station_run(station_cfg):
    return run_scenario(station_cfg)


@pytest.fixture(scope="session")
def fig2_cfg():
    return load_scenario(bundled("fig2"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(number: int, title: str, ok: bool, detail: str) -> None:
    line = f"[AC{number:02d}] {'PASS' if ok else 'FAIL'}  {title}: {detail}"
    ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
