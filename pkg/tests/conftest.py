import numpy as np
import pytest

from commbound.cbox import Prior, validate_cbox
from commbound.quantum import TwoOutcomeMeasurement, build_quantum_cbox, haar_sample

ACCEPTANCE_LINES: list[str] = []


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    if rep.when == "call":
        item.rep_call = rep


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def identity_box():
    return validate_cbox(np.eye(2).reshape(2, 1, 2))


@pytest.fixture
def uniform2():
    return Prior.uniform(2)


def random_box(rng, a_count, m_count, s_count=2):
    return validate_cbox(rng.dirichlet(np.ones(s_count), size=(a_count, m_count)))


def quantum_box(N, a_count, m_count, seed):
    states = haar_sample(N, a_count, seed)
    axes = [TwoOutcomeMeasurement(s) for s in haar_sample(N, m_count, seed + 10_000)]
    return build_quantum_cbox(states, axes)


def independent_box(rng, a_count, m_count, s_count=2):
    row = rng.dirichlet(np.ones(s_count), size=m_count)
    return validate_cbox(np.broadcast_to(row, (a_count, m_count, s_count)))
