import logging

import numpy as np
import pytest

from ppgauth.synthgen import make_cohort

ACCEPTANCE_LINES: list[str] = []


@pytest.fixture(scope="session")
def small_cohort():
    """Six subjects, one 90 s relax recording each, light noise."""
    return [c.recording for c in make_cohort("capnobase", 6, noise_level=0.03, seed=3,
                                             durations={"long": 90.0})]


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_configure(config):
    logging.getLogger("ppgauth").setLevel(logging.ERROR)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
