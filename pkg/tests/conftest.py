import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra import numpy as hnp

settings.register_profile("default", deadline=None, max_examples=60, suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

K2 = np.array([[1.0, -1.0], [-1.0, 1.0]])
P3 = np.array([[1.0, -1.0, 0.0], [-1.0, 2.0, -1.0], [0.0, -1.0, 1.0]])


def rel_close(a, b, rel=1e-9):
    a, b = np.asarray(a, dtype=float), np.asarray(b, dtype=float)
    return bool(np.all(np.abs(a - b) <= rel * np.maximum(1.0, np.abs(b))))


@st.composite
def sym_matrices(draw, min_dim=2, max_dim=12, scale=10.0):
    m = draw(st.integers(min_dim, max_dim))
    a = draw(hnp.arrays(np.float64, (m, m), elements=st.floats(-scale, scale, allow_nan=False, width=64)))
    return 0.5 * (a + a.T)


@st.composite
def seeds(draw):
    return draw(st.integers(0, 2**32 - 1))


@pytest.fixture
def k2():
    return K2.copy()


@pytest.fixture
def p3():
    return P3.copy()


def pytest_terminal_summary(terminalreporter):
    try:
        import test_acceptance
    except ImportError:
        return
    if test_acceptance.VERDICTS:
        terminalreporter.section("acceptance criteria")
        for key in sorted(test_acceptance.VERDICTS):
            terminalreporter.write_line(test_acceptance.VERDICTS[key])
