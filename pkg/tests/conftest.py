import numpy as np
import pytest
from scipy.integrate import quad


def fourier_coefficient(phase, j):
    """(1/2pi) * integral over one period of exp(i*phase(x)) exp(i*j*x), by adaptive quadrature."""
    re = quad(lambda x: np.cos(phase(x) + j * x), 0, 2 * np.pi, limit=200, epsabs=1e-14, epsrel=1e-14)[0]
    im = quad(lambda x: np.sin(phase(x) + j * x), 0, 2 * np.pi, limit=200, epsabs=1e-14, epsrel=1e-14)[0]
    return complex(re, im) / (2 * np.pi)


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
