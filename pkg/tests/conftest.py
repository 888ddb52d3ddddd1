import math

import numpy as np
import pytest

from tapmt.harmonic import ConstituentSet, TimeSeries, constituent_frequency

SIGMA_M2 = 2 * math.pi / 12.42


def model(t, a0=0.0, a1=0.0, waves=()):
    """Pointwise evaluation of a0 + a1 t + sum A cos(sigma t + phi_deg),
    written with scalar math so it shares no code with the engine."""
    out = []
    for tj in np.asarray(t, dtype=float):
        v = a0 + a1 * tj
        for sigma, amp, phi in waves:
            v += amp * math.cos(sigma * tj + math.radians(phi))
        out.append(v)
    return np.array(out)


def normal_equations(X, y):
    """Explicit (X'X)^-1 X'y."""
    X = np.asarray(X, dtype=float)
    return np.linalg.inv(X.T @ X) @ (X.T @ np.asarray(y, dtype=float))


@pytest.fixture
def m2():
    return ConstituentSet((constituent_frequency("M2"),))


@pytest.fixture
def m2_series():
    t = np.arange(336.0)
    return TimeSeries(t, model(t, 0.3, 0.0, [(SIGMA_M2, 1.2, 40.0)]))


# one line per acceptance criterion, printed after the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[n])
