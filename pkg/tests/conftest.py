import numpy as np
import pytest

from bandlab import chain
from bandlab.seeding import replica_rng

# criterion number -> (passed, detail), filled in by test_acceptance.py
CRITERIA = {}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


@pytest.fixture
def band_factory():
    def make(N, M, seed=0):
        return chain.sample_band_matrix(N, M, replica_rng(seed, 0))
    return make


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"criterion {number:2d}: {'PASS' if ok else 'FAIL'}  {detail}")
