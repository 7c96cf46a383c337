import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240917)


def two_gaussians(seed, n=200, m=2, shift=1.2816):
    """Balanced two-class Gaussian data; classes differ in feature 0 by 2*shift."""
    rng = np.random.default_rng(seed)
    y = np.repeat([-1.0, 1.0], n // 2)
    X = rng.standard_normal((n, m))
    X[:, 0] += shift * y
    return X, y


_ACCEPTANCE_LINES: list = []


@pytest.fixture
def acceptance():
    """Record one PASS/FAIL line per acceptance criterion."""

    def record(number, ok, detail):
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'} | {detail}"
        _ACCEPTANCE_LINES.append(line)
        print(line)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
