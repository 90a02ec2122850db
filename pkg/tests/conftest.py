import os
import sys

import numpy as np
import pytest
from hypothesis import HealthCheck, settings

sys.path.insert(0, os.path.dirname(__file__))

settings.register_profile("default", deadline=None, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")


@pytest.fixture
def small_data():
    from consensus_sgd.data import synth_gaussian_classification

    return synth_gaussian_classification(400, 8, seed=3)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES = []


def record_acceptance(criterion, ok, detail, seconds):
    status = ok if isinstance(ok, str) else ("PASS" if ok else "FAIL")
    ACCEPTANCE_LINES.append(f"{status:<5} {criterion:<34} {seconds:7.1f}s  {detail}")


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
