import os

import numpy as np
import pytest
from hypothesis import settings

from nlrspeckle.fileio import read_image

settings.register_profile("default", max_examples=60, deadline=None)
settings.load_profile("default")

DATA = os.path.join(os.path.dirname(__file__), "data")

# filled by the acceptance tests, printed at the end of the session
CRITERIA = {}


@pytest.fixture(scope="session")
def lena():
    return read_image(os.path.join(DATA, "lena256.pgm"))


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[key])
