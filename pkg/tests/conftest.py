import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from pado.model import SimParams

settings.register_profile("default", deadline=None, max_examples=60,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def params():
    return SimParams()


@pytest.fixture
def small():
    """A light configuration for horizon tests."""
    return SimParams(n_vehicles=8, n_slots=60)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def heavy_load(monkeypatch):
    """Scale the server's energy draw up so the battery actually charges and discharges."""
    import pado.game as game

    base = game.server_energy
    monkeypatch.setattr(game, "server_energy", lambda *a: 1e10 * base(*a))


# ------------------------------------------------------------ acceptance log

ACCEPTANCE_KEY = pytest.StashKey[dict]()


def pytest_configure(config):
    config.stash[ACCEPTANCE_KEY] = {}


@pytest.fixture
def acceptance(request):
    """Record ``(number, passed, detail)`` for the end-of-run acceptance summary."""
    log = request.config.stash[ACCEPTANCE_KEY]

    def record(number: int, passed: bool, detail: str):
        log[number] = (passed, detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    log = config.stash.get(ACCEPTANCE_KEY, {})
    if not log:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(log):
        passed, detail = log[number]
        terminalreporter.write_line(f"criterion {number}: {'PASS' if passed else 'FAIL'}  {detail}")
