import numpy as np
import pytest
from hypothesis import strategies as st

from pnormflow.graph import Graph
from pnormflow.synth import gen_dumbbell


@pytest.fixture
def path4():
    return Graph.from_edges(4, [(0, 1), (1, 2), (2, 3)])


@pytest.fixture
def triangle():
    return Graph.from_edges(3, [(0, 1), (1, 2), (0, 2)])


@pytest.fixture
def single_edge():
    return Graph.from_edges(2, [(0, 1)])


@pytest.fixture(scope="session")
def small_dumbbell():
    return gen_dumbbell(7, 3)


def random_connected(rng: np.random.Generator, n: int, extra: float = 0.3) -> Graph:
    """Random spanning tree plus independent extra edges."""
    perm = rng.permutation(n)
    edges = [(int(perm[i]), int(perm[rng.integers(0, i)])) for i in range(1, n)]
    iu, ju = np.triu_indices(n, k=1)
    keep = rng.random(len(iu)) < extra
    edges += list(zip(iu[keep].tolist(), ju[keep].tolist()))
    return Graph.from_edges(n, edges)


@st.composite
def connected_graphs(draw, min_n=2, max_n=12):
    n = draw(st.integers(min_n, max_n))
    seed = draw(st.integers(0, 2**32 - 1))
    extra = draw(st.sampled_from([0.0, 0.2, 0.5]))
    return random_connected(np.random.default_rng(seed), n, extra)


# acceptance bookkeeping ---------------------------------------------------------

ACCEPTANCE: dict = {}


@pytest.fixture
def criterion():
    """``report(key, ok, detail)`` records a verdict and fails the test when ``ok`` is false."""

    def report(key: str, ok: bool, detail: str) -> None:
        ACCEPTANCE[key] = (bool(ok), detail)
        assert ok, f"criterion {key}: {detail}"

    return report


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split()[0]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"criterion {key}: {'PASS' if ok else 'FAIL'}  {detail}")
