import warnings

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from poroflow import BifurcationWarning, Grid, ModelParams, coexisting_phases, stationary_connection

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture(scope="session")
def params():
    """Reference material constants (a=0.5, b=1, alpha=100, k1=k2=k3=1e-3)."""
    return ModelParams()


@pytest.fixture(scope="session")
def coexistence(params):
    """(params at p_co, standard phase, fluid-rich phase)."""
    return coexisting_phases(params)


@pytest.fixture(scope="session")
def grid201():
    return Grid(0.0, 1.0, 201)


@pytest.fixture(scope="session")
def stationary201(coexistence, grid201):
    q, s, f = coexistence
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", BifurcationWarning)
        return stationary_connection(q, grid201, s, f)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_KEY = pytest.StashKey[dict]()


@pytest.fixture
def record(request):
    """Record the outcome of one acceptance criterion for the terminal summary."""
    results = request.config.stash.setdefault(ACCEPTANCE_KEY, {})

    def _record(criterion: str, passed: bool, detail: str = "") -> bool:
        results[criterion] = (bool(passed), detail)
        return bool(passed)

    return _record


def _criterion_order(key):
    digits = "".join(c for c in key if c.isdigit())
    return int(digits), key


def pytest_terminal_summary(terminalreporter, config):
    results = config.stash.get(ACCEPTANCE_KEY, {})
    if not results:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(results, key=_criterion_order):
        passed, detail = results[key]
        terminalreporter.write_line(f"CRITERION {key}: {'PASS' if passed else 'FAIL'}  {detail}")
    parts = [k for k in results if k.startswith("9")]
    if parts:
        ok = all(results[k][0] for k in parts)
        terminalreporter.write_line(f"CRITERION 9 (all parts): {'PASS' if ok else 'FAIL'}")
