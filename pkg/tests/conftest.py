import json
from pathlib import Path

import numpy as np
import pytest

from extremal.instance import ExtremalInstance

ORACLES = Path(__file__).parent / "oracles" / "frozen.json"


@pytest.fixture(scope="session")
def oracle():
    with open(ORACLES) as fh:
        return json.load(fh)


def scalar(kz1, kz2, s, mu):
    return ExtremalInstance(np.array([[kz1]]), np.array([[kz2]]), np.array([[s]]), mu)


def random_pd(rng, n, lo=0.2, hi=3.0):
    q, _ = np.linalg.qr(rng.standard_normal((n, n)))
    return (q * rng.uniform(lo, hi, n)) @ q.T


def random_instance(rng, n, mu=None):
    mu = rng.uniform(1.01, 10.0) if mu is None else mu
    return ExtremalInstance(random_pd(rng, n), random_pd(rng, n), random_pd(rng, n, 0.1, 5.0), mu)


ACCEPTANCE_LINES: dict = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
