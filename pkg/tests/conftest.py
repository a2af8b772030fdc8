import numpy as np
import pytest

from pushpull_pd import network, oracle, problem
from pushpull_pd.engine import StepSchedule, run

ACCEPTANCE_RESULTS = []


def record_acceptance(number, title, passed, detail=""):
    ACCEPTANCE_RESULTS.append((number, title, bool(passed), detail))


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number, title, passed, detail in sorted(ACCEPTANCE_RESULTS):
        tag = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{tag}] {number}. {title}  {detail}")


@pytest.fixture(scope="session")
def inst42():
    return problem.canonical_instance(42)


@pytest.fixture(scope="session")
def cert42(inst42):
    return oracle.solve_centralized(inst42, tol=1e-6)


@pytest.fixture(scope="session")
def sched():
    return network.canonical_schedule()


@pytest.fixture(scope="session")
def weights(sched):
    return network.uniform_weights(sched)


@pytest.fixture(scope="session")
def run10k(inst42, sched, weights, cert42):
    """10^4-round canonical run with every per-round monitor switched on."""
    return run(
        inst42, sched, weights, StepSchedule(2.0, 0.6), rounds=10_000, record_every=500,
        certificate=cert42, monitor=("consensus", "tracking", "distance", "s_norm"),
    )


def central_diff(fun, x, h=1e-5):
    """Central finite-difference gradient of a scalar function."""
    x = np.asarray(x, dtype=float)
    g = np.empty_like(x)
    for k in range(x.size):
        e = np.zeros_like(x)
        e[k] = h
        g[k] = (fun(x + e) - fun(x - e)) / (2 * h)
    return g


def assert_rel_close(actual, expected, rel, floor=1e-8):
    actual = np.asarray(actual, dtype=float)
    expected = np.asarray(expected, dtype=float)
    scale = max(float(np.max(np.abs(expected))), floor)
    assert np.max(np.abs(actual - expected)) <= rel * scale, (actual, expected)
