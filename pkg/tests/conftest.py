import numpy as np
import pytest

from pairrelax.grid import Grid
from pairrelax.potential import tabulated_potential

_ACCEPTANCE = []


@pytest.fixture
def record_criterion():
    """Register a one-line pass/fail verdict for the acceptance summary."""

    def record(number, passed, detail):
        line = f"criterion {number}: {'PASS' if passed else 'FAIL'} | {detail}"
        _ACCEPTANCE.append((number, line))
        print(line)

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for _, line in sorted(_ACCEPTANCE):
        terminalreporter.write_line(line)


def cosine_potential(n, coeffs):
    """Tabulated W = sum_k coeffs[k-1] cos(2 pi k x) on n points."""
    x = np.arange(n) / n
    v = sum(a * np.cos(2 * np.pi * (k + 1) * x) for k, a in enumerate(coeffs))
    return tabulated_potential(np.asarray(v, dtype=float), Grid(1, n))


def random_symmetric_potential(rng, n):
    return tabulated_potential(rng.normal(size=n), Grid(1, n))
