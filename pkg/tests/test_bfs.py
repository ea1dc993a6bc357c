import threading

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from amtgraph import Runtime, bfs_sequential, build_csr, generate_urand, run_bfs, set_parent, symmetrize
from amtgraph.bfs import BFS_EXPAND, _BfsState, bfs_local_expand
from amtgraph.oracle import bfs_distances
from amtgraph.transport import TransportConfig
from amtgraph.verify import levels_from_parents, validate_bfs_tree, verify_bfs

from conftest import graph_from, random_graph


def urand_sym(scale, deg, seed):
    return build_csr(symmetrize(generate_urand(scale, deg, seed)), directed=False)


# oracle ---------------------------------------------------------------------

def test_oracle_triangle():
    G = graph_from(3, [(0, 1), (1, 2), (2, 0)], sym=True)
    parents = bfs_sequential(G, 0)
    assert list(parents) == [0, 0, 0]
    assert levels_from_parents(parents, 0).tolist() == [0, 1, 1]


def test_oracle_disconnected():
    G = graph_from(4, [(0, 1), (1, 2)], sym=True)
    assert bfs_sequential(G, 0)[3] == -1
    assert list(bfs_distances(G, 0)) == [0, 1, 2, -1]


def test_levels_from_parents_detects_cycles():
    assert levels_from_parents(np.array([0, 2, 1]), 0).tolist() == [0, -2, -2]
    assert levels_from_parents(np.array([0, 0, -1, 2]), 0).tolist() == [0, 1, -1, -2]


# set_parent -----------------------------------------------------------------

def test_set_parent_examples():
    with Runtime(1) as rt:
        pv = rt[0].create_vector("p", 4, np.int64, -1)
        lv = rt[0].create_vector("l", 4, np.int64, -1)
        assert set_parent(pv, 2, 0, 1, lv) is True
        assert pv[2] == 0 and lv[2] == 1
        assert set_parent(pv, 2, 3, 1, lv) is False
        assert pv[2] == 0


def test_set_parent_two_concurrent_claims():
    for _ in range(50):
        with Runtime(1) as rt:
            pv = rt[0].create_vector("p", 1, np.int64, -1)
            go = threading.Barrier(2)
            wins = {}

            def claim(u):
                go.wait()
                wins[u] = set_parent(pv, 0, u)

            ts = [threading.Thread(target=claim, args=(u,)) for u in (11, 12)]
            for t in ts:
                t.start()
            for t in ts:
                t.join()
            assert sorted(wins.values()) == [False, True]
            assert pv[0] == next(u for u, w in wins.items() if w)


# bfs_local_expand -----------------------------------------------------------

def expand_once(G, L, loc_id, source, parent, level, claimed=()):
    with Runtime(L) as rt:
        loc = rt[loc_id]
        pv = loc.create_vector("bfs.parents", G.n, np.int64, -1)
        lv = loc.create_vector("bfs.levels", G.n, np.int64, -1)
        for v in claimed:
            pv.local[v - pv.lo] = v
            lv.local[v - lv.lo] = 0
        loc.state["bfs"] = _BfsState(G, pv, lv, True, False)
        # a no-op handler: only the issued handles are of interest here
        loc.actions.register(BFS_EXPAND, lambda loc, p: None)
        hs = bfs_local_expand(loc, np.array([source]), np.array([parent]), np.array([level]))
        return hs, pv.local.copy()


def test_expand_visited_source_is_noop():
    G = graph_from(4, [(0, 1), (1, 2), (2, 3)], sym=True)
    hs, _ = expand_once(G, 1, 0, 1, 0, 1, claimed=[1])
    assert hs == []


def test_expand_l1_no_remote():
    G = urand_sym(6, 4, 3)
    hs, parents = expand_once(G, 1, 0, 0, 0, 0)
    assert hs == []
    assert np.array_equal(levels_from_parents(parents, 0), bfs_distances(G, 0))


def test_expand_path_graph_one_cut_edge():
    G = graph_from(4, [(0, 1), (1, 2), (2, 3)], sym=True)
    hs, _ = expand_once(G, 2, 0, 0, 0, 0)
    assert len(hs) == 1
    with Runtime(2) as rt:
        res = run_bfs(rt, G, 0)
    assert res.stats["remote_actions"] == 1
    assert res.levels.tolist() == [0, 1, 2, 3]


# run_bfs --------------------------------------------------------------------

def test_single_vertex():
    G = graph_from(1, [])
    with Runtime(1) as rt:
        assert run_bfs(rt, G, 0).parents.tolist() == [0]


@pytest.mark.parametrize("L", [1, 2, 3])
def test_star(L):
    k = 7
    G = graph_from(k + 1, [(0, i) for i in range(1, k + 1)], sym=True)
    with Runtime(L) as rt:
        res = run_bfs(rt, G, 0)
    assert res.parents.tolist() == [0] * (k + 1)
    assert res.levels.tolist() == [0] + [1] * k


def test_root_out_of_range():
    G = graph_from(2, [(0, 1)], sym=True)
    with Runtime(1) as rt:
        with pytest.raises(ValueError):
            run_bfs(rt, G, 2)


@pytest.mark.parametrize("batch", [False, True])
@pytest.mark.parametrize("L", [1, 2, 4])
def test_urand_matches_oracle(L, batch):
    G = urand_sym(10, 16, 1)
    with Runtime(L) as rt:
        res = run_bfs(rt, G, 0, batch=batch)
    verdict = verify_bfs(G, res.parents, 0, bfs_sequential(G, 0))
    assert verdict.ok, verdict
    assert np.array_equal(res.levels_recorded, res.levels)


def test_l1_parents_equal_sequential():
    G = urand_sym(9, 8, 4)
    with Runtime(1) as rt:
        res = run_bfs(rt, G, 5)
    assert res.parents.tolist() == list(bfs_sequential(G, 5))


@settings(max_examples=25, deadline=None)
@given(st.integers(0, 2**31), st.integers(1, 40), st.integers(1, 5), st.booleans())
def test_random_graphs_tree_valid(seed, n, L, batch):
    rng = np.random.default_rng(seed)
    G = random_graph(rng, n, int(rng.integers(0, 3 * n)), sym=True)
    root = int(rng.integers(0, n))
    with Runtime(L) as rt:
        res = run_bfs(rt, G, root, batch=batch)
    assert validate_bfs_tree(G, res.parents, root)
    assert verify_bfs(G, res.parents, root).ok


# adversarial schedule ------------------------------------------------------

# 3 localities, block 3: {0,1,2} {3,4,5} {6,7,8}. The short route to 3 goes
# 0 -> 6 -> 3 (level 2); the long one 0 -> 1 -> 2 -> 4 -> 3 (level 4). Holding
# the 0 -> 2 link makes the long route claim 3 first.
ADV_EDGES = [(0, 1), (1, 2), (2, 4), (4, 3), (3, 5), (0, 6), (6, 3)]


def adversarial_run(relax, batch=False):
    G = graph_from(9, ADV_EDGES, sym=True)

    def delay(env):
        return 0.15 if (env.src, env.dst) == (0, 2) and env.tag < 0xF0 else 0.0

    with Runtime(3, workers=2, transport=TransportConfig(delay=delay)) as rt:
        res = run_bfs(rt, G, 0, relax=relax, batch=batch)
    return G, res


@pytest.mark.parametrize("batch", [False, True])
def test_adversarial_needs_relaxation(batch):
    G, res = adversarial_run(relax=True, batch=batch)
    assert res.stats["relaxed"] >= 1
    assert verify_bfs(G, res.parents, 0, bfs_sequential(G, 0)).ok
    assert res.levels.tolist() == [0, 1, 2, 2, 3, 3, 1, -1, -1]


def test_adversarial_without_relaxation_is_wrong():
    G, res = adversarial_run(relax=False)
    verdict = verify_bfs(G, res.parents, 0, bfs_sequential(G, 0))
    assert res.stats["relaxed"] == 0
    assert validate_bfs_tree(G, res.parents, 0)  # still a tree, just not a BFS tree
    assert not verdict.ok and verdict.level_mismatches > 0
