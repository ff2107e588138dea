import numpy as np
import pytest


@pytest.fixture
def rng():
    return np.random.default_rng(20240601)


def goe_matrix(N, rng):
    A = rng.standard_normal((N, N))
    return (A + A.T) / np.sqrt(2 * N)


_ACCEPTANCE = {}


@pytest.fixture(scope="session")
def acceptance_report():
    """Record and print one PASS/FAIL line per acceptance criterion."""

    def report(n, ok, detail):
        line = f"criterion {n:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        _ACCEPTANCE[n] = line
        print(line)
        return ok

    return report


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for n in sorted(_ACCEPTANCE):
            terminalreporter.write_line(_ACCEPTANCE[n])
