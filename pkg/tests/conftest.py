import numpy as np
import pytest
from hypothesis import HealthCheck, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from se3obs.dynamics import Inertia

settings.register_profile("default", deadline=None, max_examples=100,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

ENVISAT_I = np.array([[17023.3, 397.1, -2171.4],
                      [397.1, 124825.7, 344.2],
                      [-2171.4, 344.2, 129112.2]])
ENVISAT_M = 7827.867

finite = st.floats(-3.0, 3.0, allow_nan=False, allow_infinity=False)


def vec(n, elements=finite):
    return arrays(np.float64, n, elements=elements)


@st.composite
def twists(draw, max_angle=np.pi - 0.1, max_q=3.0):
    """Twists with rotation part of norm at most ``max_angle``."""
    axis = draw(vec(3, st.floats(-1.0, 1.0)))
    n = np.linalg.norm(axis)
    if n < 1e-6:
        axis = np.array([1.0, 0.0, 0.0])
        n = 1.0
    angle = draw(st.floats(0.0, max_angle))
    q = draw(vec(3, st.floats(-max_q, max_q)))
    return np.concatenate([axis / n * angle, q])


@st.composite
def inertias(draw):
    """Random SPD rotational inertia (moderate scale) and mass."""
    a = draw(arrays(np.float64, (3, 3), elements=st.floats(-1.0, 1.0)))
    rot = a @ a.T + draw(st.floats(0.2, 3.0)) * np.eye(3)
    return Inertia(rot, draw(st.floats(0.2, 5.0)))


@pytest.fixture(scope="session")
def envisat_inertia():
    return Inertia(ENVISAT_I, ENVISAT_M)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report(capsys):
    """Print one PASS/FAIL line for an acceptance criterion, inline and in the summary."""

    def emit(number: int, ok: bool, detail: str) -> None:
        line = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"
        ACCEPTANCE_LINES.append(line)
        with capsys.disabled():
            print(f"\n    {line}")

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
