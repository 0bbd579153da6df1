import os
import sys

import numpy as np
import pytest
from hypothesis import settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")


def random_pair(rng, m, n, r, lo=0.1, hi=1.0):
    from klnmf.matrix import FactorPair

    return FactorPair(rng.uniform(lo, hi, (m, r)), rng.uniform(lo, hi, (r, n)))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def small_problem(rng):
    from klnmf.model import KLProblem

    X = rng.uniform(0.0, 2.0, (6, 5))
    X[0, 1] = 0.0
    X[3, 4] = 0.0
    return KLProblem(X, 3)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    lines = getattr(mod, "REPORT", None)
    if not lines:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(lines, key=lambda k: (int("".join(c for c in k if c.isdigit()) or 0), k)):
        terminalreporter.write_line(lines[key])
