import numpy as np
import pytest

from idbpd.problems.data import make_blob_split
from idbpd.problems.dro_mtl import make_dro_mtl
from idbpd.problems.testbed import make_testbed

ACCEPTANCE_LINES: dict[int, str] = {}


def record_criterion(number: int, passed: bool, detail: str) -> None:
    ACCEPTANCE_LINES[number] = f"criterion {number:2d}: {'PASS' if passed else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[number])


@pytest.fixture(scope="session")
def testbed42():
    """The seeded reference instance (seed 42, n=3, m=2, l=3) and its KKT point."""
    return make_testbed(seed=42, n=3, m=2, l=3)


@pytest.fixture(scope="session")
def small_split():
    return make_blob_split(0, n_samples=120, n_features=3, n_labels=4, cluster_std=1.5)


@pytest.fixture(scope="session")
def small_dro(small_split):
    return make_dro_mtl(small_split, hidden_width=4, lambda_reg=1e-3, r=0.2)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
