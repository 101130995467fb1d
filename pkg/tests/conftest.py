import numpy as np
import pytest

from dendi.data import Dataset

ACCEPTANCE_LINES = []


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def random_dataset(rng, n=40, p=2, q=0, sigma=1.0, round_to=None):
    X = rng.standard_normal((n, p))
    if round_to is not None:
        X = np.round(X, round_to)
    Z = rng.standard_normal((n, q)) if q else None
    y = X @ rng.normal(size=p) + 0.8 * (X[:, 0] > 0) + sigma * rng.standard_normal(n)
    return Dataset(y, X, Z)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
