import numpy as np
import pytest
from hypothesis import settings, strategies as st

from qselberg.qcore import sample_generic

settings.register_profile("default", deadline=None, max_examples=25)
settings.load_profile("default")


def nonzero_complex(lo=0.2, hi=2.0):
    """Complex numbers with log-uniform-ish modulus in [lo, hi]."""
    return st.builds(lambda r, phi: complex(r * np.cos(phi), r * np.sin(phi)),
                     st.floats(lo, hi), st.floats(-np.pi, np.pi))


seeds = st.integers(0, 2**32 - 1)


def generic(seed, n):
    return sample_generic(np.random.default_rng(seed), n)


def rel(a, b):
    return abs(a - b) / max(abs(a), abs(b), 1e-300)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


# one line per acceptance criterion, printed at the end of the run
ACCEPTANCE_LINES = {}


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for key in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(ACCEPTANCE_LINES[key])
