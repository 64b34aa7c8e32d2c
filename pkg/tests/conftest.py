import numpy as np
import pytest

from adsignal.core import AuctionInstance
from adsignal.single_minded import SingleMindedStructure


def random_instance(rng, n_max=5, m_max=2, d_max=3, n_min=1, d_min=1):
    n = int(rng.integers(n_min, n_max + 1))
    m = int(rng.integers(1, min(m_max, n) + 1))
    d = int(rng.integers(d_min, d_max + 1))
    lam = np.sort(rng.random(m))[::-1]
    return AuctionInstance(m, lam, rng.dirichlet(np.ones(d)), rng.random((n, d)))


def random_sm(rng, d_max=3, n_max=5, m_max=2, d_min=1, delta_lo=0.05):
    d = int(rng.integers(d_min, d_max + 1))
    n = int(rng.integers(1, n_max + 1))
    m = int(rng.integers(1, min(m_max, n) + 1))
    sm = SingleMindedStructure(rng.integers(0, d, n), rng.uniform(delta_lo, 1.0, d))
    inst = sm.instance(m, np.sort(rng.random(m))[::-1], rng.dirichlet(np.ones(d)))
    return inst, sm


def random_y(rng, d, beta):
    y = -rng.uniform(0, beta, d)
    if y.sum() < -beta:
        y *= beta / -y.sum()
    return y


@pytest.fixture
def minmax():
    return AuctionInstance(1, [1.0], [0.5, 0.5], [[1.0, 0.0], [0.0, 1.0]])


@pytest.fixture
def sm2():
    sm = SingleMindedStructure(np.array([0, 1]), [1.0, 1.0])
    return sm.instance(1, [1.0], [0.5, 0.5]), sm


ACCEPTANCE_LINES = {}


def record_criterion(number, ok, detail):
    ACCEPTANCE_LINES[number] = f"criterion {number:>2}: {'PASS' if ok else 'FAIL'}  {detail}"
    print(ACCEPTANCE_LINES[number])


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[k])
