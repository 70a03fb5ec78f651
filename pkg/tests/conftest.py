import math

import numpy as np
import pytest

from gnslab.params import derive_params, t_upper
from gnslab.profiles import RadialProfile

# (n, t) pairs used across the acceptance criteria
PAIRS = [(2, 1.5), (2, 3.0), (2, 4.5), (3, 1.5), (3, 2.0), (4, 1.3)]


def validity_grid(count: int = 50, seed: int = 7):
    """Deterministic (n, t) points strictly inside the admissible range."""
    rng = np.random.default_rng(seed)
    out = []
    dims = [2, 3, 4, 5, 6]
    for i in range(count):
        n = dims[i % len(dims)]
        hi = t_upper(n)
        frac = rng.uniform(0.05, 0.95)
        out.append((n, float(1 + frac * (hi - 1))))
    return out


@pytest.fixture(scope="session")
def p23():
    return derive_params(2, 3.0)


@pytest.fixture(scope="session")
def p32():
    return derive_params(3, 2.0)


def zero_profile():
    return RadialProfile(lambda r: 0.0 * np.asarray(r, dtype=float), lambda r: 0.0 * np.asarray(r, dtype=float), 10.0, label="zero")


def rel(a, b):
    return abs(a - b) / max(abs(b), 1e-300)


PI = math.pi


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE
    except ImportError:
        return
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for item in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[item])
