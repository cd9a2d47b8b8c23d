import numpy as np
import pytest

from stochvortex.fields import StreamParams
from stochvortex.geometry import equilateral_state

AREA0 = 3.0 * np.sqrt(3.0) / 4.0
ANGLE0 = np.pi / 3.0


def fd_jacobian(fn, x, h=1e-5):
    """Central-difference Jacobian of a map R^2 -> R^2; ``J[i, j] = d f_i / d x_j``."""
    x = np.asarray(x, dtype=float)
    cols = []
    for j in range(2):
        e = np.zeros(2)
        e[j] = h
        cols.append((np.asarray(fn(x + e)) - np.asarray(fn(x - e))) / (2 * h))
    return np.stack(cols, axis=1)


def fd_gradient(fn, x, h=1e-6):
    x = np.asarray(x, dtype=float)
    g = np.zeros_like(x)
    for idx in np.ndindex(x.shape):
        e = np.zeros_like(x)
        e[idx] = h
        g[idx] = (fn(x + e) - fn(x - e)) / (2 * h)
    return g


@pytest.fixture
def params():
    return StreamParams()


@pytest.fixture
def state0():
    return equilateral_state()


# one line per acceptance criterion, echoed in the terminal summary
ACCEPTANCE_LINES: list[str] = []


def report(number: int, ok: bool, text: str) -> bool:
    line = f"{'PASS' if ok else 'FAIL'} criterion {number}: {text}"
    ACCEPTANCE_LINES.append(line)
    print(line)
    return ok


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[2].rstrip(":"))):
            terminalreporter.write_line(line)
