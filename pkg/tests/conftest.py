import numpy as np
import pytest

from nlvar.domain import ExteriorData, Field, build_mesh

# filled by test_acceptance, printed once at the end of the session
ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for line in sorted(ACCEPTANCE_LINES, key=lambda l: int(l.split()[1].rstrip(":"))):
        terminalreporter.write_line(line)


@pytest.fixture
def step_mesh():
    # Omega = (0, 1), two interior cells, one window cell per side, far field beyond
    return build_mesh((0.0, 1.0), 2, 0.5, 1)


@pytest.fixture
def step_field(step_mesh):
    return Field(step_mesh, [0.0, 1.0], ExteriorData([0.0, 1.0], (0.0, 1.0)))


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def random_field(mesh, rng, lo=0.0, hi=1.0):
    ext = ExteriorData(rng.uniform(lo, hi, mesh.n_window), tuple(rng.uniform(lo, hi, 2)))
    return Field(mesh, rng.uniform(lo, hi, mesh.n_interior), ext)
