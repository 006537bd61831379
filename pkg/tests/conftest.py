import numpy as np
import pytest

from fraccomp.model import DofcParams, DofcSpec


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_spec():
    """p = 4, one fractional component per group, one AR(1) component."""
    return DofcSpec(p=4, group_sizes=(1, 1), s0=1, ar_order=1)


@pytest.fixture
def small_params():
    lam = np.array([[1.0, 0.0], [0.6, 0.8], [0.4, -0.5], [0.2, 0.3]])
    gamma = np.array([[0.5], [0.2], [-0.3], [0.4]])
    return DofcParams(d=[0.7, 0.3], lam=lam, gamma=gamma, phi=[[0.5]],
                      h=[0.3, 0.4, 0.5, 0.6], c=[1.0, -1.0, 0.5, 0.0])


@pytest.fixture
def recovery_spec():
    return DofcSpec(p=6, group_sizes=(1, 2), s0=1, ar_order=1)


@pytest.fixture
def recovery_params(recovery_spec):
    rng = np.random.default_rng(3)
    lam = rng.normal(size=(6, 3))
    lam[0, 1] = lam[0, 2] = lam[1, 2] = 0.0
    gamma = np.tril(rng.normal(size=(6, 1)))
    return DofcParams(d=[0.65, 0.35], lam=lam, gamma=gamma, phi=[[0.5]],
                      h=np.full(6, 0.5), c=np.zeros(6))


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
