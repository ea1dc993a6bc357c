import numpy as np
import pytest

from amtgraph import EdgeList, Runtime, build_csr, symmetrize
from amtgraph.transport import TransportConfig, free_endpoints


def graph_from(n, pairs, sym=False):
    el = EdgeList.from_pairs(n, pairs)
    if sym:
        el = symmetrize(el)
    return build_csr(el, directed=not sym)


def random_graph(rng, n, m, sym=False):
    pairs = rng.integers(0, n, size=(m, 2)) if m else np.empty((0, 2), np.int64)
    return graph_from(n, pairs, sym)


def tcp_config(L, timeout=10.0):
    return TransportConfig("tcp", free_endpoints(L), connect_timeout=timeout)


@pytest.fixture
def runtime_factory():
    made = []

    def make(L=1, **kw):
        rt = Runtime(L, **kw)
        made.append(rt)
        return rt

    yield make
    for rt in made:
        rt.shutdown()


ACCEPTANCE = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE):
        terminalreporter.write_line(ACCEPTANCE[key])
