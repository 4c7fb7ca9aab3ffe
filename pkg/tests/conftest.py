import time

import numpy as np
import pytest

from sldg.adapt import AdaptConfig, adapt_loop
from sldg.dgspace import DGFunction, DGSpace
from sldg.experiments import constant_source_problem, run_converge
from sldg.mesh import Mesh, build_crisscross

SEED = 20240607
CONVERGE_PAIRS = ((1, 4.0), (2, 4.0), (1, 8.0), (2, 8.0))
ADAPT_PS = (2.0, 4.0, 8.0, 12.0)


@pytest.fixture
def rng():
    return np.random.default_rng(SEED)


@pytest.fixture
def two_cell_mesh():
    """Unit square split along the diagonal from (0, 0) to (1, 1)."""
    return Mesh([[0, 0], [1, 0], [1, 1], [0, 1]], [[0, 1, 2], [0, 2, 3]])


@pytest.fixture
def random_function():
    def make(space: DGSpace, rng, scale=1.0):
        return DGFunction(space, scale * rng.normal(size=space.total_dofs))

    return make


@pytest.fixture(scope="session")
def converge_runs():
    """Five-level uniform studies for every (k, p) pair, timed."""
    out = {}
    for k, p in CONVERGE_PAIRS:
        t0 = time.perf_counter()
        res = run_converge(k, p, levels=5)
        out[(k, p)] = (res, time.perf_counter() - t0)
    return out


@pytest.fixture(scope="session")
def adapt_runs():
    """Eight adaptive iterations with f = 1000 and k = 1 for each p."""
    return {p: adapt_loop(constant_source_problem(p), 1, AdaptConfig(max_iterations=8))
            for p in ADAPT_PS}


@pytest.fixture(scope="session")
def crisscross2():
    return build_crisscross(2)


CRITERIA: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    CRITERIA[number] = f"[{'PASS' if ok else 'FAIL'}] criterion {number}: {detail}"
    print(CRITERIA[number])


def pytest_terminal_summary(terminalreporter):
    if CRITERIA:
        terminalreporter.section("acceptance criteria")
        for n in sorted(CRITERIA):
            terminalreporter.write_line(CRITERIA[n])
