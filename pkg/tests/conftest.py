import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from torusflow.reference import Kind, ReferenceSpec, make_reference

settings.register_profile("default", deadline=None, max_examples=25, derandomize=True,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

TWO_PI = 2 * np.pi


@pytest.fixture(scope="session")
def lam():
    return make_reference(ReferenceSpec(Kind.LAMELLA2D, n=128))


@pytest.fixture(scope="session")
def lam256():
    return make_reference(ReferenceSpec(Kind.LAMELLA2D, n=256))


@pytest.fixture(scope="session")
def lam3():
    return make_reference(ReferenceSpec(Kind.LAMELLA3D, n=32))


@pytest.fixture(scope="session")
def disc():
    return make_reference(ReferenceSpec(Kind.DISC2D, radius=0.25, n=128))


@pytest.fixture(scope="session")
def cyl():
    return make_reference(ReferenceSpec(Kind.CYLINDER3D, radius=0.25, n=32))


def top(ref, f):
    """Lamella field carrying f on the upper component, zero on the lower one."""
    u = np.zeros(ref.grid.shape)
    u[1] = f
    return u


def xcoord(ref):
    return ref.grid.mesh()[0][1 if ref.grid.components == 2 else 0]


def theta(ref):
    return ref.grid.mesh()[0][0] / ref.spec.radius


def pytest_terminal_summary(terminalreporter):
    try:
        from test_acceptance import ACCEPTANCE_LINES
    except ImportError:
        return
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
