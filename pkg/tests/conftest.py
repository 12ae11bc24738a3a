import numpy as np
import pytest


def random_state(rng, d, rank=None):
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ g.conj().T
    return rho / np.trace(rho).real


def random_hermitian(rng, d):
    a = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (a + a.conj().T)


def direct_rhs(h, channels, rho):
    """Master-equation right-hand side written out term by term."""
    out = -1j * (h @ rho - rho @ h)
    for r, o in channels:
        od = o.conj().T
        out = out + r * (o @ rho @ od) - 0.5 * r * (od @ o @ rho) - 0.5 * r * (rho @ od @ o)
    return out


def ket(i, d):
    v = np.zeros(d, dtype=complex)
    v[i] = 1.0
    return v


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# acceptance criteria report: one PASS/FAIL line each, repeated in the summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
