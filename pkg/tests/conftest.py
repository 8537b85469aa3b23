import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from degdiff.graphs import GraphSpec, build_graph
from degdiff.grid import Grid
from degdiff.semigroup import evolve

settings.register_profile(
    "repo",
    deadline=None,
    max_examples=60,
    derandomize=True,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("repo")


def indicator(grid, height, half):
    return grid.field(np.where(np.abs(grid.x) <= half, height, 0.0))


@pytest.fixture(scope="session")
def heaviside():
    return build_graph(GraphSpec("heaviside", e_c=1.0))


@pytest.fixture(scope="session")
def linear():
    return build_graph(GraphSpec("linear", a=1.0))


@pytest.fixture(scope="session")
def pme():
    return build_graph(GraphSpec("power", m=2.0))


@pytest.fixture(scope="session")
def bv_run(heaviside):
    """Supercritical heaviside run shared by several modules (coarse version)."""
    grid = Grid(2.0, 400)
    return evolve(heaviside, indicator(grid, 1.5, 1.0 / 3.0), 0.1, 50)


# one PASS/FAIL line per acceptance criterion, echoed live and again at the end
ACCEPTANCE: dict[int, str] = {}


@pytest.fixture
def criterion(capsys):
    def emit(number: int, title: str, ok: bool, detail: str) -> None:
        line = f"[{'PASS' if ok else 'FAIL'}] criterion {number:2d} {title}: {detail}"
        ACCEPTANCE[number] = line
        with capsys.disabled():
            print("\n" + line)

    return emit


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE:
        terminalreporter.section("acceptance criteria")
        for k in sorted(ACCEPTANCE):
            terminalreporter.write_line(ACCEPTANCE[k])
