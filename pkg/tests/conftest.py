import numpy as np
import pytest

ACCEPTANCE_LINES = []


def random_instance(rng, n_max=12, q_max=12, deficient=None):
    """Random (X, Y, k) with X optionally rank-deficient."""
    n = int(rng.integers(1, n_max + 1))
    q = int(rng.integers(1, q_max + 1))
    if deficient is None:
        deficient = bool(rng.integers(0, 2))
    if deficient and min(n, q) > 1:
        r = int(rng.integers(1, min(n, q)))
        x = rng.standard_normal((n, r)) @ rng.standard_normal((r, q))
    else:
        x = rng.standard_normal((n, q))
    y = rng.standard_normal((n, q))
    k = int(rng.integers(0, n + 1))
    return x, y, k


def random_orthogonal(rng, n):
    q, r = np.linalg.qr(rng.standard_normal((n, n)))
    return q * np.sign(np.diag(r))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
